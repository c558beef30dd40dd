"""Domain types for the supply network and demand plans, plus dataset loading and validation."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Union

Source = Union[str, Path, io.IOBase]


class DatasetError(Exception):
    """Base class for dataset loading/validation failures."""


class MalformedRowError(DatasetError):
    def __init__(self, file: str, line: int | str, column: str, reason: str) -> None:
        self.file = file
        self.line = line
        self.column = column
        self.reason = reason
        super().__init__(f"{file}, row {line}, field '{column}': {reason}")


class DanglingReferenceError(DatasetError):
    def __init__(self, missing_id: str, referrer: str) -> None:
        self.missing_id = missing_id
        self.referrer = referrer
        super().__init__(f"{referrer} references unknown id '{missing_id}'")


class DuplicateIdError(DatasetError):
    def __init__(self, duplicate_id: str, where: str) -> None:
        self.duplicate_id = duplicate_id
        self.where = where
        super().__init__(f"duplicate id '{duplicate_id}' in {where}")


@dataclass(frozen=True)
class Material:
    id: str
    name: str


@dataclass(frozen=True)
class Product:
    id: str
    name: str
    bom: dict[str, float]  # material id -> units per product unit


@dataclass(frozen=True)
class Supplier:
    id: str
    material: str
    unit_price: float
    capacity: float
    inventory: float
    active: bool = True

    @property
    def supply_limit(self) -> float:
        """Effective per-period supply: bounded by both throughput and stock on hand."""
        return min(self.capacity, self.inventory)


@dataclass(frozen=True)
class Factory:
    id: str
    production_capacity: float
    production_cost: float
    active: bool = True


@dataclass(frozen=True)
class Retailer:
    id: str
    region: str


@dataclass(frozen=True)
class Lane:
    id: str
    origin: str
    destination: str
    unit_ship_cost: float
    capacity: float
    lead_time: float
    active: bool = True


@dataclass(frozen=True)
class DemandRecord:
    id: str
    retailer: str
    product: str
    quantity: float
    due_day: int
    delay_cost_rate: float
    lost_penalty: float
    attributes: dict[str, str] = field(default_factory=dict)
    owner: str = ""
    modified_by: str = ""
    change_note: str = ""
    modified_at: str = ""


@dataclass(frozen=True)
class DelayParams:
    """Delay-cost semantics: days counted = max(0, lead_time - due_day - grace_days)."""

    grace_days: float = 0.0


@dataclass(frozen=True)
class SupplyNetwork:
    materials: dict[str, Material]
    products: dict[str, Product]
    suppliers: dict[str, Supplier]
    factories: dict[str, Factory]
    retailers: dict[str, Retailer]
    lanes: dict[str, Lane]
    delay: DelayParams = field(default_factory=DelayParams)

    def lane_between(self, origin: str, destination: str) -> Lane | None:
        for lane in self.lanes.values():
            if lane.origin == origin and lane.destination == destination:
                return lane
        return None

    def supply_lanes(self) -> list[Lane]:
        return [l for l in self.lanes.values() if l.origin in self.suppliers]

    def distribution_lanes(self) -> list[Lane]:
        return [l for l in self.lanes.values() if l.origin in self.factories]

    def suppliers_of(self, material_id: str) -> list[Supplier]:
        return [s for s in self.suppliers.values() if s.material == material_id]

    def delay_days(self, lead_time: float, due_day: float) -> float:
        return max(0.0, lead_time - due_day - self.delay.grace_days)


@dataclass(frozen=True)
class DemandPlan:
    snapshot_id: str
    as_of: str
    records: tuple[DemandRecord, ...]

    def record(self, record_id: str) -> DemandRecord:
        for r in self.records:
            if r.id == record_id:
                return r
        raise KeyError(record_id)

    def by_id(self) -> dict[str, DemandRecord]:
        return {r.id: r for r in self.records}


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" | "warning"
    code: str
    message: str
    location: str


DEMAND_COLUMNS = [
    "id", "retailer", "product", "quantity", "due_day", "delay_cost_rate",
    "lost_penalty", "attributes", "owner", "modified_by", "change_note", "modified_at",
]


def _read_text(source: Source) -> tuple[str, str]:
    """Return (text, display name) for a path or readable stream."""
    if isinstance(source, (str, Path)):
        p = Path(source)
        return p.read_text(encoding="utf-8"), p.name
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data, getattr(source, "name", "<stream>")


def _require(row: dict[str, Any], key: str, file: str, where: int | str) -> Any:
    if key not in row or row[key] is None:
        raise MalformedRowError(file, where, key, "missing field")
    return row[key]


def _number(row: dict[str, Any], key: str, file: str, where: int | str,
            minimum: float | None = 0.0) -> float:
    raw = _require(row, key, file, where)
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise MalformedRowError(file, where, key, f"not a number: {raw!r}") from None
    if minimum is not None and value < minimum:
        raise MalformedRowError(file, where, key, f"must be >= {minimum}, got {value}")
    return value


def _text(row: dict[str, Any], key: str, file: str, where: int | str) -> str:
    raw = _require(row, key, file, where)
    if not isinstance(raw, str) or not raw:
        raise MalformedRowError(file, where, key, "must be a non-empty string")
    return raw


def _flag(row: dict[str, Any], key: str, default: bool = True) -> bool:
    raw = row.get(key, default)
    if isinstance(raw, bool):
        return raw
    if isinstance(raw, str):
        low = raw.strip().lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
    raise MalformedRowError("<row>", "?", key, f"not a boolean: {raw!r}")


def load_network(source: Source) -> SupplyNetwork:
    """Parse and cross-check a network document (JSON with one section per entity kind)."""
    text, name = _read_text(source)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedRowError(name, exc.lineno, f"col {exc.colno}", exc.msg) from None
    if not isinstance(doc, dict):
        raise MalformedRowError(name, 0, "<root>", "network document must be an object")

    def rows(section: str) -> list[dict[str, Any]]:
        raw = doc.get(section, [])
        if not isinstance(raw, list):
            raise MalformedRowError(name, 0, section, "section must be a list")
        for i, row in enumerate(raw):
            if not isinstance(row, dict):
                raise MalformedRowError(name, i + 1, section, "row must be an object")
        return raw

    materials: dict[str, Material] = {}
    for i, row in enumerate(rows("materials"), 1):
        m = Material(id=_text(row, "id", name, i), name=_text(row, "name", name, i))
        if m.id in materials:
            raise DuplicateIdError(m.id, "materials")
        materials[m.id] = m

    products: dict[str, Product] = {}
    for i, row in enumerate(rows("products"), 1):
        pid = _text(row, "id", name, i)
        bom_raw = _require(row, "bom", name, i)
        if not isinstance(bom_raw, dict) or not bom_raw:
            raise MalformedRowError(name, i, "bom", "must be a non-empty material->units map")
        bom: dict[str, float] = {}
        for mat, units in bom_raw.items():
            try:
                units_f = float(units)
            except (TypeError, ValueError):
                raise MalformedRowError(name, i, "bom", f"units not a number: {units!r}") from None
            if units_f < 0:
                raise MalformedRowError(name, i, "bom", f"units must be >= 0, got {units_f}")
            bom[mat] = units_f
        p = Product(id=pid, name=_text(row, "name", name, i), bom=bom)
        if p.id in products:
            raise DuplicateIdError(p.id, "products")
        products[p.id] = p
        for mat in p.bom:
            if mat not in materials:
                raise DanglingReferenceError(mat, f"product {p.id} bom")

    suppliers: dict[str, Supplier] = {}
    for i, row in enumerate(rows("suppliers"), 1):
        s = Supplier(
            id=_text(row, "id", name, i),
            material=_text(row, "material", name, i),
            unit_price=_number(row, "unit_price", name, i),
            capacity=_number(row, "capacity", name, i),
            inventory=_number(row, "inventory", name, i),
            active=_flag(row, "active"),
        )
        if s.id in suppliers:
            raise DuplicateIdError(s.id, "suppliers")
        if s.material not in materials:
            raise DanglingReferenceError(s.material, f"supplier {s.id}")
        suppliers[s.id] = s

    factories: dict[str, Factory] = {}
    for i, row in enumerate(rows("factories"), 1):
        f = Factory(
            id=_text(row, "id", name, i),
            production_capacity=_number(row, "production_capacity", name, i),
            production_cost=_number(row, "production_cost", name, i),
            active=_flag(row, "active"),
        )
        if f.id in factories:
            raise DuplicateIdError(f.id, "factories")
        factories[f.id] = f

    retailers: dict[str, Retailer] = {}
    for i, row in enumerate(rows("retailers"), 1):
        r = Retailer(id=_text(row, "id", name, i), region=_text(row, "region", name, i))
        if r.id in retailers:
            raise DuplicateIdError(r.id, "retailers")
        retailers[r.id] = r

    lanes: dict[str, Lane] = {}
    seen_pairs: set[tuple[str, str]] = set()
    for i, row in enumerate(rows("lanes"), 1):
        lane = Lane(
            id=_text(row, "id", name, i),
            origin=_text(row, "origin", name, i),
            destination=_text(row, "destination", name, i),
            unit_ship_cost=_number(row, "unit_ship_cost", name, i),
            capacity=_number(row, "capacity", name, i),
            lead_time=_number(row, "lead_time", name, i),
            active=_flag(row, "active"),
        )
        if lane.id in lanes:
            raise DuplicateIdError(lane.id, "lanes")
        if lane.origin in suppliers:
            if lane.destination not in factories:
                raise DanglingReferenceError(lane.destination, f"lane {lane.id} (supplier lanes end at factories)")
        elif lane.origin in factories:
            if lane.destination not in retailers:
                raise DanglingReferenceError(lane.destination, f"lane {lane.id} (factory lanes end at retailers)")
        else:
            raise DanglingReferenceError(lane.origin, f"lane {lane.id}")
        pair = (lane.origin, lane.destination)
        if pair in seen_pairs:
            raise DuplicateIdError(f"{lane.origin}->{lane.destination}", "lanes (duplicate node pair)")
        seen_pairs.add(pair)
        lanes[lane.id] = lane

    delay = DelayParams()
    delay_raw = doc.get("delay")
    if delay_raw is not None:
        if not isinstance(delay_raw, dict):
            raise MalformedRowError(name, 0, "delay", "must be an object")
        delay = DelayParams(grace_days=float(delay_raw.get("grace_days", 0.0)))

    return SupplyNetwork(
        materials=materials, products=products, suppliers=suppliers,
        factories=factories, retailers=retailers, lanes=lanes, delay=delay,
    )


def _parse_attributes(raw: str, file: str, line: int) -> dict[str, str]:
    attrs: dict[str, str] = {}
    if not raw.strip():
        return attrs
    for part in raw.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise MalformedRowError(file, line, "attributes", f"expected key=value, got {part!r}")
        key, _, value = part.partition("=")
        attrs[key.strip()] = value.strip()
    return attrs


def load_demand(source: Source, snapshot_id: str | None = None) -> DemandPlan:
    """Parse a demand snapshot from a delimited table.

    snapshot_id defaults to the file stem for paths and to a content hash for
    streams, so identical bytes always produce an identical plan.
    """
    text, name = _read_text(source)
    if snapshot_id is None:
        if isinstance(source, (str, Path)):
            snapshot_id = Path(source).stem
        else:
            snapshot_id = "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]

    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise MalformedRowError(name, 0, "<header>", "empty file")
    missing = [c for c in DEMAND_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise MalformedRowError(name, 1, missing[0], "missing column in header")

    records: list[DemandRecord] = []
    seen: set[str] = set()
    for line_no, row in enumerate(reader, 2):
        if row.get("id") is None or all((v is None or v == "") for v in row.values()):
            continue
        rid = _text(row, "id", name, line_no)
        if rid in seen:
            raise DuplicateIdError(rid, f"{name} demand records")
        seen.add(rid)
        quantity = _number(row, "quantity", name, line_no)
        lost_penalty = _number(row, "lost_penalty", name, line_no)
        if lost_penalty <= 0:
            raise MalformedRowError(name, line_no, "lost_penalty", "must be > 0")
        due_raw = _require(row, "due_day", name, line_no)
        try:
            due_day = int(due_raw)
        except (TypeError, ValueError):
            raise MalformedRowError(name, line_no, "due_day", f"not an integer: {due_raw!r}") from None
        records.append(DemandRecord(
            id=rid,
            retailer=_text(row, "retailer", name, line_no),
            product=_text(row, "product", name, line_no),
            quantity=quantity,
            due_day=due_day,
            delay_cost_rate=_number(row, "delay_cost_rate", name, line_no),
            lost_penalty=lost_penalty,
            attributes=_parse_attributes(row.get("attributes") or "", name, line_no),
            owner=row.get("owner") or "",
            modified_by=row.get("modified_by") or "",
            change_note=row.get("change_note") or "",
            modified_at=row.get("modified_at") or "",
        ))

    as_of = max((r.modified_at for r in records if r.modified_at), default="")
    return DemandPlan(snapshot_id=snapshot_id, as_of=as_of, records=tuple(records))


def load_dataset(network_source: Source, demand_source: Source,
                 snapshot_id: str | None = None) -> tuple[SupplyNetwork, DemandPlan]:
    """Load and fully cross-check a (network, demand) dataset."""
    network = load_network(network_source)
    demand = load_demand(demand_source, snapshot_id=snapshot_id)
    for record in demand.records:
        if record.retailer not in network.retailers:
            raise DanglingReferenceError(record.retailer, f"demand record {record.id}")
        if record.product not in network.products:
            raise DanglingReferenceError(record.product, f"demand record {record.id}")
    return network, demand


def _capable_factories(network: SupplyNetwork, product: Product) -> list[Factory]:
    """Active factories that can source every bom material and have capacity to produce."""
    capable = []
    for f in network.factories.values():
        if not f.active or f.production_capacity <= 0:
            continue
        ok = True
        for mat, units in product.bom.items():
            if units == 0:
                continue
            sourced = False
            for s in network.suppliers_of(mat):
                if not s.active or s.supply_limit <= 0:
                    continue
                lane = network.lane_between(s.id, f.id)
                if lane is not None and lane.active and lane.capacity > 0:
                    sourced = True
                    break
            if not sourced:
                ok = False
                break
        if ok:
            capable.append(f)
    return capable


def validate(network: SupplyNetwork, demand: DemandPlan) -> list[ValidationIssue]:
    """Check every structural invariant; errors make the dataset unsolvable, warnings do not."""
    issues: list[ValidationIssue] = []

    def err(code: str, message: str, location: str) -> None:
        issues.append(ValidationIssue("error", code, message, location))

    def warn(code: str, message: str, location: str) -> None:
        issues.append(ValidationIssue("warning", code, message, location))

    for p in network.products.values():
        if not p.bom:
            err("empty-bom", f"product {p.id} has no bill of materials", f"products/{p.id}")
        for mat, units in p.bom.items():
            if mat not in network.materials:
                err("dangling-reference", f"product {p.id} bom references unknown material {mat}",
                    f"products/{p.id}")
            if units < 0:
                err("negative-value", f"bom units must be >= 0, got {units}", f"products/{p.id}")

    for s in network.suppliers.values():
        if s.material not in network.materials:
            err("dangling-reference", f"supplier {s.id} sells unknown material {s.material}",
                f"suppliers/{s.id}")
        for field_name, value in (("unit_price", s.unit_price), ("capacity", s.capacity),
                                  ("inventory", s.inventory)):
            if value < 0:
                err("negative-value", f"{field_name} must be >= 0, got {value}", f"suppliers/{s.id}")
        if s.active and s.supply_limit <= 0:
            warn("inert-supplier",
                 f"inert supplier: {s.id} is active but can supply nothing "
                 f"(capacity {s.capacity}, inventory {s.inventory})",
                 f"suppliers/{s.id}")

    for f in network.factories.values():
        if f.production_capacity < 0 or f.production_cost < 0:
            err("negative-value", f"factory {f.id} has a negative capacity or cost",
                f"factories/{f.id}")

    seen_pairs: set[tuple[str, str]] = set()
    for lane in network.lanes.values():
        loc = f"lanes/{lane.id}"
        if lane.origin in network.suppliers:
            if lane.destination not in network.factories:
                err("bad-lane", f"supplier lane {lane.id} must end at a factory", loc)
        elif lane.origin in network.factories:
            if lane.destination not in network.retailers:
                err("bad-lane", f"factory lane {lane.id} must end at a retailer", loc)
        else:
            err("dangling-reference", f"lane {lane.id} origin {lane.origin} is unknown", loc)
        if lane.unit_ship_cost < 0 or lane.capacity < 0 or lane.lead_time < 0:
            err("negative-value", f"lane {lane.id} has a negative cost, capacity, or lead time", loc)
        pair = (lane.origin, lane.destination)
        if pair in seen_pairs:
            err("duplicate-lane", f"duplicate lane between {lane.origin} and {lane.destination}", loc)
        seen_pairs.add(pair)

    seen_records: set[str] = set()
    for r in demand.records:
        loc = f"demand/{r.id}"
        if r.id in seen_records:
            err("duplicate-id", f"duplicate demand record id {r.id}", loc)
        seen_records.add(r.id)
        if r.retailer not in network.retailers:
            err("dangling-reference", f"record {r.id} references unknown retailer {r.retailer}", loc)
            continue
        if r.product not in network.products:
            err("dangling-reference", f"record {r.id} references unknown product {r.product}", loc)
            continue
        if r.quantity < 0:
            err("negative-value", f"record {r.id} quantity must be >= 0", loc)
        if r.lost_penalty <= 0:
            err("nonpositive-penalty", f"record {r.id} lost_penalty must be > 0", loc)
        if r.delay_cost_rate < 0:
            err("negative-value", f"record {r.id} delay_cost_rate must be >= 0", loc)
        if r.quantity > 0:
            product = network.products[r.product]
            reachable = False
            for f in _capable_factories(network, product):
                lane = network.lane_between(f.id, r.retailer)
                if lane is not None and lane.active and lane.capacity > 0:
                    reachable = True
                    break
            if not reachable:
                warn("unreachable-demand",
                     f"unreachable demand: no producing-capable factory has an active lane to "
                     f"{r.retailer} for record {r.id}", loc)

    return issues


def network_to_dict(network: SupplyNetwork) -> dict[str, Any]:
    return {
        "materials": [vars(m).copy() for m in network.materials.values()],
        "products": [{"id": p.id, "name": p.name, "bom": dict(p.bom)} for p in network.products.values()],
        "suppliers": [vars(s).copy() for s in network.suppliers.values()],
        "factories": [vars(f).copy() for f in network.factories.values()],
        "retailers": [vars(r).copy() for r in network.retailers.values()],
        "lanes": [vars(l).copy() for l in network.lanes.values()],
        "delay": {"grace_days": network.delay.grace_days},
    }


def demand_to_dict(demand: DemandPlan) -> dict[str, Any]:
    return {
        "snapshot_id": demand.snapshot_id,
        "as_of": demand.as_of,
        "records": [
            {
                "id": r.id, "retailer": r.retailer, "product": r.product,
                "quantity": r.quantity, "due_day": r.due_day,
                "delay_cost_rate": r.delay_cost_rate, "lost_penalty": r.lost_penalty,
                "attributes": dict(sorted(r.attributes.items())),
                "owner": r.owner, "modified_by": r.modified_by,
                "change_note": r.change_note, "modified_at": r.modified_at,
            }
            for r in demand.records
        ],
    }


def dataset_fingerprint(network: SupplyNetwork, demand: DemandPlan) -> str:
    """Stable content hash; used to prove scenario application never touches the baseline."""
    blob = json.dumps(
        {"network": network_to_dict(network), "demand": demand_to_dict(demand)},
        sort_keys=True, separators=(",", ":"),
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def numeric_field_values(network: SupplyNetwork, demand: DemandPlan) -> list[float]:
    """Every numeric value stored in the dataset; the privacy scan checks none of them leak."""
    values: list[float] = []
    for p in network.products.values():
        values.extend(p.bom.values())
    for s in network.suppliers.values():
        values.extend((s.unit_price, s.capacity, s.inventory))
    for f in network.factories.values():
        values.extend((f.production_capacity, f.production_cost))
    for lane in network.lanes.values():
        values.extend((lane.unit_ship_cost, lane.capacity, lane.lead_time))
    for r in demand.records:
        values.extend((r.quantity, float(r.due_day), r.delay_cost_rate, r.lost_penalty))
    return values


__all__ = [
    "DatasetError", "MalformedRowError", "DanglingReferenceError", "DuplicateIdError",
    "Material", "Product", "Supplier", "Factory", "Retailer", "Lane",
    "DemandRecord", "DelayParams", "SupplyNetwork", "DemandPlan", "ValidationIssue",
    "load_network", "load_demand", "load_dataset", "validate",
    "network_to_dict", "demand_to_dict", "dataset_fingerprint", "numeric_field_values",
    "replace",
]
