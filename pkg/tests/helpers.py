"""Shared test support: invariant checks, random instances, independent expectations."""

from __future__ import annotations

import random

from planlens.model import (
    DemandPlan,
    DemandRecord,
    Factory,
    Lane,
    Material,
    Product,
    Retailer,
    Supplier,
    SupplyNetwork,
)
from planlens.oracle import certified_route_optimum, oracle_solve, scale_quantities
from planlens.solver import BREAKDOWN_KEYS, FulfillmentPlan

TOL = 1e-9


def check_plan_invariants(network: SupplyNetwork, demand: DemandPlan,
                          plan: FulfillmentPlan) -> None:
    """Balance, capacity, conversion, and breakdown-sum invariants for one plan."""
    assert plan.status == "optimal"
    records = {r.id: r for r in demand.records}

    served: dict[str, float] = {r.id: 0.0 for r in demand.records}
    lane_units: dict[str, float] = {}
    inflow: dict[tuple[str, str], float] = {}
    need: dict[tuple[str, str], float] = {}
    production: dict[str, float] = {}
    supplier_used: dict[str, float] = {}
    breakdown = {key: 0.0 for key in BREAKDOWN_KEYS}

    for flow in plan.flows:
        assert flow.units > 0
        lane = network.lanes[flow.lane]
        assert lane.active, f"flow on inactive lane {lane.id}"
        lane_units[lane.id] = lane_units.get(lane.id, 0.0) + flow.units
        if flow.item in records:
            record = records[flow.item]
            factory = network.factories[lane.origin]
            assert factory.active
            assert lane.destination == record.retailer
            served[record.id] += flow.units
            production[factory.id] = production.get(factory.id, 0.0) + flow.units
            for material, per_unit in network.products[record.product].bom.items():
                need[(factory.id, material)] = (
                    need.get((factory.id, material), 0.0) + flow.units * per_unit)
            breakdown["production"] += flow.units * factory.production_cost
            breakdown["outbound_shipping"] += flow.units * lane.unit_ship_cost
            breakdown["delay"] += (flow.units * record.delay_cost_rate
                                   * network.delay_days(lane.lead_time, record.due_day))
        else:
            supplier = network.suppliers[lane.origin]
            assert supplier.active
            assert supplier.material == flow.item
            inflow[(lane.destination, flow.item)] = (
                inflow.get((lane.destination, flow.item), 0.0) + flow.units)
            supplier_used[supplier.id] = supplier_used.get(supplier.id, 0.0) + flow.units
            breakdown["material"] += flow.units * supplier.unit_price
            breakdown["inbound_shipping"] += flow.units * lane.unit_ship_cost

    for record in demand.records:
        lost = plan.lost.get(record.id, 0.0)
        assert lost >= 0
        assert abs(served[record.id] + lost - record.quantity) <= TOL, record.id
        breakdown["lost_penalty"] += lost * record.lost_penalty

    for lane_id, units in lane_units.items():
        assert units <= network.lanes[lane_id].capacity + TOL, lane_id
    for factory_id, units in production.items():
        assert units <= network.factories[factory_id].production_capacity + TOL
        assert abs(plan.production.get(factory_id, 0.0) - units) <= TOL
    for key, required in need.items():
        assert inflow.get(key, 0.0) + TOL >= required, key
    for supplier_id, units in supplier_used.items():
        assert units <= network.suppliers[supplier_id].supply_limit + TOL

    for key in BREAKDOWN_KEYS:
        assert abs(plan.cost_breakdown[key] - breakdown[key]) <= 1e-6, key
    assert abs(plan.total_cost - sum(plan.cost_breakdown.values())) <= TOL


def independent_optimum(network: SupplyNetwork, demand: DemandPlan,
                        scale: float = 1.0) -> float:
    """Optimum via oracle paths only: route certificate, else integer enumeration
    (on a quantity-rescaled copy when the instance is too large to enumerate)."""
    certified = certified_route_optimum(network, demand)
    if certified is not None:
        return certified
    if scale == 1.0:
        return oracle_solve(network, demand).total_cost
    scaled_network, scaled_demand = scale_quantities(network, demand, scale)
    return oracle_solve(scaled_network, scaled_demand).total_cost / scale


def random_instance(rng: random.Random) -> tuple[SupplyNetwork, DemandPlan]:
    """Small random instance inside the oracle's domain: integral quantities, bom of 1."""
    n_mat = rng.randint(1, 2)
    materials = {f"M{i}": Material(f"M{i}", f"material {i}") for i in range(1, n_mat + 1)}
    mat_ids = sorted(materials)

    products: dict[str, Product] = {}
    for i in range(1, rng.randint(1, 2) + 1):
        chosen = rng.sample(mat_ids, rng.randint(1, n_mat))
        products[f"P{i}"] = Product(f"P{i}", f"product {i}", {m: 1.0 for m in sorted(chosen)})

    suppliers: dict[str, Supplier] = {}
    for i in range(1, rng.randint(1, 3) + 1):
        suppliers[f"S{i}"] = Supplier(
            id=f"S{i}", material=rng.choice(mat_ids),
            unit_price=rng.randint(0, 50) / 10,
            capacity=float(rng.randint(0, 8)), inventory=float(rng.randint(0, 8)),
            active=rng.random() > 0.1)

    factories: dict[str, Factory] = {}
    for i in range(1, rng.randint(1, 3) + 1):
        factories[f"F{i}"] = Factory(
            id=f"F{i}", production_capacity=float(rng.randint(0, 8)),
            production_cost=rng.randint(0, 50) / 10, active=rng.random() > 0.1)

    retailers: dict[str, Retailer] = {}
    for i in range(1, rng.randint(1, 3) + 1):
        retailers[f"R{i}"] = Retailer(f"R{i}", rng.choice(["North", "South", "East", "West"]))

    lanes: dict[str, Lane] = {}
    for s in suppliers.values():
        for f in factories.values():
            if rng.random() < 0.85:
                lane_id = f"{s.id}_{f.id}"
                lanes[lane_id] = Lane(
                    id=lane_id, origin=s.id, destination=f.id,
                    unit_ship_cost=rng.randint(0, 30) / 10,
                    capacity=float(rng.randint(0, 8)),
                    lead_time=float(rng.randint(0, 6)), active=rng.random() > 0.1)
    for f in factories.values():
        for r in retailers.values():
            if rng.random() < 0.85:
                lane_id = f"{f.id}_{r.id}"
                lanes[lane_id] = Lane(
                    id=lane_id, origin=f.id, destination=r.id,
                    unit_ship_cost=rng.randint(0, 30) / 10,
                    capacity=float(rng.randint(0, 8)),
                    lead_time=float(rng.randint(0, 6)), active=rng.random() > 0.1)

    network = SupplyNetwork(materials=materials, products=products, suppliers=suppliers,
                            factories=factories, retailers=retailers, lanes=lanes)

    records: list[DemandRecord] = []
    remaining = 8
    for i in range(1, rng.randint(1, 3) + 1):
        quantity = rng.randint(0, min(4, remaining))
        remaining -= quantity
        retailer = rng.choice(sorted(retailers))
        records.append(DemandRecord(
            id=f"D{i}", retailer=retailer, product=rng.choice(sorted(products)),
            quantity=float(quantity), due_day=rng.randint(0, 6),
            delay_cost_rate=rng.randint(0, 20) / 10,
            lost_penalty=float(rng.randint(20, 60)),
            attributes={"region": retailers[retailer].region},
            owner="ops", modified_by="gen", change_note="synthetic", modified_at="",
        ))
    demand = DemandPlan(snapshot_id="random", as_of="", records=tuple(records))
    return network, demand


def random_restricting_script(rng: random.Random, network: SupplyNetwork,
                              demand: DemandPlan) -> str | None:
    """A script of 1-3 edits that can only shrink the feasible region or raise costs."""
    choices: list[str] = []
    for f in network.factories.values():
        if f.active:
            choices.append(f"DISABLE FACTORY {f.id}")
        choices.append(f"SET CAPACITY FACTORY {f.id} TO "
                       f"{rng.randint(0, int(f.production_capacity))}")
    for s in network.suppliers.values():
        if s.active:
            choices.append(f"DISABLE SUPPLIER {s.id}")
        choices.append(f"SET CAPACITY SUPPLIER {s.id} TO {rng.randint(0, int(s.capacity))}")
    for lane in network.lanes.values():
        if lane.active:
            choices.append(f"DISABLE LANE {lane.id}")
        choices.append(f"SET CAPACITY LANE {lane.id} TO {rng.randint(0, int(lane.capacity))}")
        choices.append(f"ADJUST SHIP COST LANE {lane.id} BY {rng.randint(1, 30) / 10}")
    for material in network.materials:
        if network.suppliers_of(material):
            choices.append(f"ADJUST PRICE MATERIAL {material} BY {rng.randint(1, 30) / 10}")
    if network.factories:
        for retailer in network.retailers:
            allowed = rng.sample(sorted(network.factories),
                                 rng.randint(1, len(network.factories)))
            choices.append(f"RESTRICT RETAILER {retailer} TO [{', '.join(sorted(allowed))}]")
    if not choices:
        return None
    picked = rng.sample(choices, min(len(choices), rng.randint(1, 3)))
    return "; ".join(picked)


# ---------------------------------------------------------------------------
# Random scenario scripts for round-trip properties

from planlens import dsl as _dsl
from planlens.insights import (
    QUERY_METRICS as _QUERY_METRICS,
    CheapestLane as _CheapestLane,
    FractionPlansWhere as _FractionPlansWhere,
    Period as _Period,
    ShipmentQuantity as _ShipmentQuantity,
    SupplierInventory as _SupplierInventory,
    TopFactoryByOutput as _TopFactoryByOutput,
)

_ID_HEADS = "SFRMPDL"


def _rand_id(rng: random.Random) -> str:
    return f"{rng.choice(_ID_HEADS)}{rng.randint(0, 99)}"


def _rand_name(rng: random.Random) -> str:
    if rng.random() < 0.3:
        return rng.choice(["North West", "east coast", "Zone 9"])
    return rng.choice(["North", "South", "East", "West"])


def _rand_number(rng: random.Random, signed: bool = False) -> float:
    value = rng.choice([
        float(rng.randint(0, 500)),
        round(rng.uniform(0, 100), 3),
        rng.uniform(0, 10),
    ])
    if signed and rng.random() < 0.5:
        value = -value
    return value


def _rand_selector(rng: random.Random) -> _dsl.Selector:
    kind = rng.choice(["all", "retailer", "product", "record", "attr", "region"])
    if kind == "all":
        return _dsl.Selector("all")
    if kind == "attr":
        return _dsl.Selector("attr", value=_rand_name(rng), key=f"k{rng.randint(0, 9)}")
    if kind == "region":
        return _dsl.Selector("region", value=_rand_name(rng))
    return _dsl.Selector(kind, value=_rand_id(rng))


def _rand_period(rng: random.Random) -> _Period:
    if rng.random() < 0.5:
        return _Period("last", rng.randint(1, 90))
    a = rng.randint(0, 50)
    return _Period("range", a, a + rng.randint(0, 50))


def random_statement(rng: random.Random) -> _dsl.Statement:
    kind = rng.randrange(12)
    if kind == 0:
        return _dsl.ScaleDemand(_rand_selector(rng), _rand_number(rng))
    if kind == 1:
        return _dsl.SetDemand(_rand_id(rng), _rand_number(rng))
    if kind == 2:
        return _dsl.SetCapacity(rng.choice(["factory", "supplier", "lane"]),
                                _rand_id(rng), _rand_number(rng))
    if kind == 3:
        return _dsl.SetLeadTime(_rand_id(rng), _rand_number(rng))
    if kind == 4:
        return _dsl.Disable(rng.choice(["factory", "supplier", "lane"]), _rand_id(rng))
    if kind == 5:
        return _dsl.Enable(rng.choice(["factory", "supplier", "lane"]), _rand_id(rng))
    if kind == 6:
        return _dsl.RestrictRetailer(
            _rand_id(rng), tuple(_rand_id(rng) for _ in range(rng.randint(1, 3))))
    if kind == 7:
        return _dsl.AdjustPrice(_rand_id(rng),
                                _rand_id(rng) if rng.random() < 0.5 else None,
                                rng.choice(["by", "to", "times"]),
                                _rand_number(rng, signed=True))
    if kind == 8:
        target_kind = rng.choice(["lane", "region"])
        target = _rand_id(rng) if target_kind == "lane" else _rand_name(rng)
        return _dsl.AdjustShipCost(target_kind, target,
                                   rng.choice(["by", "to", "times"]),
                                   _rand_number(rng, signed=True))
    if kind == 9:
        return _dsl.ShiftDueDate(_rand_selector(rng), rng.randint(-30, 30))
    if kind == 10:
        return _dsl.AddLane(_rand_id(rng), _rand_id(rng), _rand_number(rng),
                            _rand_number(rng), _rand_number(rng))
    form = rng.randrange(5)
    if form == 0:
        query = _SupplierInventory(_rand_id(rng), _rand_id(rng))
    elif form == 1:
        query = _CheapestLane(_rand_id(rng), _rand_id(rng))
    elif form == 2:
        query = _ShipmentQuantity(_rand_id(rng), _rand_id(rng))
    elif form == 3:
        query = _TopFactoryByOutput(_rand_period(rng))
    else:
        query = _FractionPlansWhere(
            rng.choice(sorted(_QUERY_METRICS)),
            rng.choice([">", ">=", "<", "<="]), _rand_number(rng), _rand_period(rng))
    return _dsl.Query(query)


def random_script(rng: random.Random) -> _dsl.ScenarioScript:
    return _dsl.ScenarioScript(tuple(
        random_statement(rng) for _ in range(rng.randint(1, 4))))


# ---------------------------------------------------------------------------
# Sentinel datasets for privacy scans

import itertools as _itertools

from dataclasses import replace as _replace


def sentinel_dataset(network: SupplyNetwork,
                     demand: DemandPlan) -> tuple[SupplyNetwork, DemandPlan, list[float]]:
    """Clone the dataset with every numeric field replaced by a unique sentinel.

    Ids and structure stay intact so translation still resolves references.
    Sentinels use an exact binary fraction so their decimal rendering is
    distinctive; any sentinel appearing in an outbound prompt is a leak.
    """
    counter = _itertools.count()
    sentinels: list[float] = []

    def sentinel() -> float:
        value = 9_000_000.0 + next(counter) * 17 + 0.140625
        sentinels.append(value)
        return value

    def int_sentinel() -> int:
        value = 9_500_000 + next(counter) * 17
        sentinels.append(float(value))
        return value

    products = {pid: _replace(p, bom={m: sentinel() for m in p.bom})
                for pid, p in network.products.items()}
    suppliers = {sid: _replace(s, unit_price=sentinel(), capacity=sentinel(),
                               inventory=sentinel())
                 for sid, s in network.suppliers.items()}
    factories = {fid: _replace(f, production_capacity=sentinel(), production_cost=sentinel())
                 for fid, f in network.factories.items()}
    lanes = {lid: _replace(l, unit_ship_cost=sentinel(), capacity=sentinel(),
                           lead_time=sentinel())
             for lid, l in network.lanes.items()}
    records = tuple(_replace(r, quantity=sentinel(), due_day=int_sentinel(),
                             delay_cost_rate=sentinel(), lost_penalty=sentinel())
                    for r in demand.records)
    return (
        _replace(network, products=products, suppliers=suppliers, factories=factories,
                 lanes=lanes),
        _replace(demand, records=records),
        sentinels,
    )


def numeric_renderings(value: float) -> set[str]:
    """Plausible decimal spellings of one numeric value."""
    forms = {str(value), repr(value), f"{value:g}"}
    if float(value).is_integer():
        forms.add(str(int(value)))
    return forms


# ---------------------------------------------------------------------------
# Random demand snapshot pairs for drift properties

def _random_record(rng: random.Random, rid: str) -> DemandRecord:
    return DemandRecord(
        id=rid, retailer=rng.choice(["R1", "R2"]), product="P",
        quantity=float(rng.randint(0, 100)), due_day=rng.randint(0, 30),
        delay_cost_rate=0.1, lost_penalty=10.0,
        attributes={"region": rng.choice(["East", "West"]),
                    "hw": rng.choice(["Gen1", "Gen2"]),
                    "business_group": rng.choice(["compute", "storage"])},
        owner="ops", modified_by=rng.choice(["alice", "bob", ""]),
        change_note=rng.choice(["reviewed", ""]), modified_at="2025-01-01T00:00:00",
    )


def random_snapshot_pair(rng: random.Random) -> tuple[DemandPlan, DemandPlan]:
    ids = [f"D{i}" for i in range(1, rng.randint(4, 10))]
    a_records = []
    b_records = []
    for rid in ids:
        in_a = rng.random() < 0.8
        in_b = rng.random() < 0.8
        record = _random_record(rng, rid)
        if in_a:
            a_records.append(record)
        if in_b:
            if in_a and rng.random() < 0.5:
                b_records.append(record)  # unchanged
            else:
                b_records.append(_random_record(rng, rid))
    plan_a = DemandPlan("snap_a", "", tuple(a_records))
    plan_b = DemandPlan("snap_b", "", tuple(b_records))
    return plan_a, plan_b
