from __future__ import annotations

import io
import json

import pytest

from planlens.model import (
    DanglingReferenceError,
    DuplicateIdError,
    MalformedRowError,
    dataset_fingerprint,
    load_dataset,
    load_demand,
    load_network,
    validate,
)

DEMAND_HEADER = ("id,retailer,product,quantity,due_day,delay_cost_rate,lost_penalty,"
                 "attributes,owner,modified_by,change_note,modified_at\n")


def test_demo_net_counts(demo):
    network, demand = demo
    assert len(network.suppliers) == 2
    assert len(network.factories) == 2
    assert len(network.retailers) == 2
    assert len(network.lanes) == 8
    assert len(demand.records) == 2
    assert len(network.materials) == 1
    assert len(network.products) == 1


def test_demo_net_field_values(demo):
    network, demand = demo
    assert network.suppliers["S1"].unit_price == 2.0
    assert network.suppliers["S1"].supply_limit == 100
    assert network.suppliers["S2"].supply_limit == 50
    assert network.lanes["S1_F1"].unit_ship_cost == 0.5
    record = demand.record("D2")
    assert record.quantity == 30
    assert record.due_day == 5
    assert record.attributes["business_group"] == "compute"


def test_empty_demand_file(demo_dir):
    plan = load_demand(io.StringIO(DEMAND_HEADER))
    assert plan.records == ()


def test_dangling_lane_reference(demo_dir):
    doc = json.loads((demo_dir / "network.json").read_text())
    doc["lanes"][0]["destination"] = "F9"
    with pytest.raises(DanglingReferenceError) as err:
        load_network(io.StringIO(json.dumps(doc)))
    assert "F9" in str(err.value)


def test_dangling_demand_reference(demo_dir):
    bad = DEMAND_HEADER + "D1,R9,P,5,5,0.1,10,,o,m,n,2025-01-01T00:00:00\n"
    with pytest.raises(DanglingReferenceError) as err:
        load_dataset(demo_dir / "network.json", io.StringIO(bad))
    assert "R9" in str(err.value)


def test_duplicate_record_id(demo_dir):
    bad = (DEMAND_HEADER
           + "D1,R1,P,5,5,0.1,10,,o,m,n,t\n"
           + "D1,R2,P,5,5,0.1,10,,o,m,n,t\n")
    with pytest.raises(DuplicateIdError):
        load_demand(io.StringIO(bad))


def test_malformed_row_reports_location():
    bad = DEMAND_HEADER + "D1,R1,P,notanumber,5,0.1,10,,o,m,n,t\n"
    with pytest.raises(MalformedRowError) as err:
        load_demand(io.StringIO(bad))
    assert err.value.column == "quantity"
    assert err.value.line == 2


def test_missing_header_column():
    with pytest.raises(MalformedRowError) as err:
        load_demand(io.StringIO("id,retailer\n"))
    assert "missing column" in str(err.value)


def test_duplicate_lane_pair(demo_dir):
    doc = json.loads((demo_dir / "network.json").read_text())
    doc["lanes"].append(dict(doc["lanes"][0], id="dupe"))
    with pytest.raises(DuplicateIdError):
        load_network(io.StringIO(json.dumps(doc)))


def test_load_is_deterministic(demo_dir):
    one = load_dataset(demo_dir / "network.json", demo_dir / "demand.csv")
    two = load_dataset(demo_dir / "network.json", demo_dir / "demand.csv")
    assert dataset_fingerprint(*one) == dataset_fingerprint(*two)
    assert one[0] == two[0]
    assert one[1] == two[1]


def test_validate_demo_is_clean(demo):
    assert validate(*demo) == []


def test_validate_unreachable_demand(demo_dir):
    doc = json.loads((demo_dir / "network.json").read_text())
    for lane in doc["lanes"]:
        if lane["destination"] == "R2":
            lane["active"] = False
    network = load_network(io.StringIO(json.dumps(doc)))
    demand = load_demand(demo_dir / "demand.csv")
    issues = validate(network, demand)
    assert any(i.code == "unreachable-demand" and "D2" in i.message for i in issues)
    assert all(i.severity == "warning" for i in issues)


def test_validate_inert_supplier(demo_dir):
    doc = json.loads((demo_dir / "network.json").read_text())
    doc["suppliers"][1]["inventory"] = 0
    doc["suppliers"][1]["capacity"] = 0
    network = load_network(io.StringIO(json.dumps(doc)))
    demand = load_demand(demo_dir / "demand.csv")
    issues = validate(network, demand)
    assert any(i.code == "inert-supplier" and "S2" in i.message for i in issues)


def test_attributes_roundtrip():
    text = DEMAND_HEADER + "D1,R1,P,5,5,0.1,10,a=1;b=x y,o,m,n,t\n"
    plan = load_demand(io.StringIO(text))
    assert plan.records[0].attributes == {"a": "1", "b": "x y"}


def test_snapshot_id_defaults(demo_dir):
    from_path = load_demand(demo_dir / "demand.csv")
    assert from_path.snapshot_id == "demand"
    text = (demo_dir / "demand.csv").read_text()
    from_stream = load_demand(io.StringIO(text))
    assert from_stream.snapshot_id.startswith("sha256:")
    again = load_demand(io.StringIO(text))
    assert from_stream.snapshot_id == again.snapshot_id
