"""Cost-minimizing flow program over the layered network and plan comparison.

Material flows supplier->factory, product flows factory->retailer, one planning
period. Lost-demand slack variables price infeasibility instead of failing, so
every well-formed instance solves to "optimal".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.optimize import linprog

from .model import DemandPlan, SupplyNetwork, validate

FEASIBILITY_TOL = 1e-9
OPTIMALITY_TOL = 1e-6

BREAKDOWN_KEYS = (
    "material", "inbound_shipping", "production", "outbound_shipping", "delay", "lost_penalty",
)


class SolverInputError(Exception):
    """Raised when solve() is handed a dataset that validate() would reject."""

    def __init__(self, issues: list) -> None:
        self.issues = issues
        detail = "; ".join(i.message for i in issues[:5])
        super().__init__(f"dataset has {len(issues)} input error(s): {detail}")


class PlanUniverseError(Exception):
    """Raised when diffing plans whose node/lane/record universes do not line up."""


@dataclass(frozen=True)
class Flow:
    lane: str
    item: str  # material id on supply lanes, demand-record id on distribution lanes
    units: float


@dataclass(frozen=True)
class FlowProgram:
    variables: tuple[tuple, ...]  # ("x", lane, material) | ("y", lane, record) | ("lost", record)
    c: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    bounds: tuple[tuple[float, float | None], ...]
    row_labels_ub: tuple[str, ...]
    row_labels_eq: tuple[str, ...]


@dataclass(frozen=True)
class FulfillmentPlan:
    status: str  # "optimal" | "infeasible-input"
    flows: tuple[Flow, ...]
    production: dict[str, float]
    lost: dict[str, float]
    cost_breakdown: dict[str, float]
    total_cost: float
    record_ids: tuple[str, ...] = ()
    lane_ids: tuple[str, ...] = ()

    def fulfilled(self, record_id: str) -> float:
        return sum(f.units for f in self.flows if f.item == record_id)

    def lane_units(self) -> dict[str, float]:
        totals: dict[str, float] = {}
        for f in self.flows:
            totals[f.lane] = totals.get(f.lane, 0.0) + f.units
        return totals


@dataclass(frozen=True)
class PlanDiff:
    base_total: float
    alt_total: float
    delta_total: float
    delta_by_component: dict[str, float]
    changed_flows: tuple[tuple[str, float, float], ...]  # (lane, base units, alt units)
    delta_lost: dict[str, float]
    feasibility_note: str


def build_program(network: SupplyNetwork, demand: DemandPlan) -> FlowProgram:
    """Assemble the LP. Variable order is fixed (lane id, record id) so solves are reproducible."""
    variables: list[tuple] = []
    costs: list[float] = []
    bounds: list[tuple[float, float | None]] = []

    supply_lanes = sorted((l for l in network.supply_lanes() if l.active), key=lambda l: l.id)
    dist_lanes = sorted((l for l in network.distribution_lanes() if l.active), key=lambda l: l.id)
    records = sorted(demand.records, key=lambda r: r.id)

    for lane in supply_lanes:
        supplier = network.suppliers[lane.origin]
        factory = network.factories[lane.destination]
        variables.append(("x", lane.id, supplier.material))
        costs.append(supplier.unit_price + lane.unit_ship_cost)
        ub = lane.capacity if (supplier.active and factory.active) else 0.0
        bounds.append((0.0, ub))

    for lane in dist_lanes:
        factory = network.factories[lane.origin]
        for record in records:
            if record.retailer != lane.destination:
                continue
            variables.append(("y", lane.id, record.id))
            delay_days = network.delay_days(lane.lead_time, record.due_day)
            costs.append(
                factory.production_cost
                + lane.unit_ship_cost
                + delay_days * record.delay_cost_rate
            )
            bounds.append((0.0, lane.capacity if factory.active else 0.0))

    for record in records:
        variables.append(("lost", record.id))
        costs.append(record.lost_penalty)
        bounds.append((0.0, None))

    index = {v: i for i, v in enumerate(variables)}
    n = len(variables)

    eq_rows: list[np.ndarray] = []
    eq_rhs: list[float] = []
    eq_labels: list[str] = []
    for record in records:
        row = np.zeros(n)
        for lane in dist_lanes:
            key = ("y", lane.id, record.id)
            if key in index:
                row[index[key]] = 1.0
        row[index[("lost", record.id)]] = 1.0
        eq_rows.append(row)
        eq_rhs.append(record.quantity)
        eq_labels.append(f"balance:{record.id}")

    ub_rows: list[np.ndarray] = []
    ub_rhs: list[float] = []
    ub_labels: list[str] = []

    for factory in sorted(network.factories.values(), key=lambda f: f.id):
        keys = [("y", l.id, r.id) for l in dist_lanes if l.origin == factory.id
                for r in records if ("y", l.id, r.id) in index]
        if not keys:
            continue
        row = np.zeros(n)
        for key in keys:
            row[index[key]] = 1.0
        ub_rows.append(row)
        ub_rhs.append(factory.production_capacity if factory.active else 0.0)
        ub_labels.append(f"factory-capacity:{factory.id}")

    for lane in dist_lanes:
        keys = [("y", lane.id, r.id) for r in records if ("y", lane.id, r.id) in index]
        if not keys:
            continue
        row = np.zeros(n)
        for key in keys:
            row[index[key]] = 1.0
        ub_rows.append(row)
        ub_rhs.append(lane.capacity)
        ub_labels.append(f"lane-capacity:{lane.id}")

    for supplier in sorted(network.suppliers.values(), key=lambda s: s.id):
        keys = [("x", l.id, supplier.material) for l in supply_lanes if l.origin == supplier.id]
        keys = [k for k in keys if k in index]
        if not keys:
            continue
        row = np.zeros(n)
        for key in keys:
            row[index[key]] = 1.0
        ub_rows.append(row)
        ub_rhs.append(supplier.supply_limit if supplier.active else 0.0)
        ub_labels.append(f"supplier-limit:{supplier.id}")

    # Conversion: material inflow must cover production * bom at every factory.
    materials = sorted(network.materials)
    for factory in sorted(network.factories.values(), key=lambda f: f.id):
        for material in materials:
            row = np.zeros(n)
            nonzero = False
            for lane in supply_lanes:
                if lane.destination != factory.id:
                    continue
                key = ("x", lane.id, network.suppliers[lane.origin].material)
                if key in index and key[2] == material:
                    row[index[key]] = -1.0
                    nonzero = True
            for lane in dist_lanes:
                if lane.origin != factory.id:
                    continue
                for record in records:
                    key = ("y", lane.id, record.id)
                    if key not in index:
                        continue
                    per_unit = network.products[record.product].bom.get(material, 0.0)
                    if per_unit:
                        row[index[key]] += per_unit
                        nonzero = True
            if nonzero:
                ub_rows.append(row)
                ub_rhs.append(0.0)
                ub_labels.append(f"conversion:{factory.id}:{material}")

    return FlowProgram(
        variables=tuple(variables),
        c=np.asarray(costs, dtype=float),
        a_ub=np.vstack(ub_rows) if ub_rows else np.zeros((0, n)),
        b_ub=np.asarray(ub_rhs, dtype=float),
        a_eq=np.vstack(eq_rows) if eq_rows else np.zeros((0, n)),
        b_eq=np.asarray(eq_rhs, dtype=float),
        bounds=tuple(bounds),
        row_labels_ub=tuple(ub_labels),
        row_labels_eq=tuple(eq_labels),
    )


def _clamp(value: float) -> float:
    return 0.0 if abs(value) <= FEASIBILITY_TOL else float(value)


def _extract_plan(network: SupplyNetwork, demand: DemandPlan,
                  program: FlowProgram, x: np.ndarray) -> FulfillmentPlan:
    records = {r.id: r for r in demand.records}
    flows: list[Flow] = []
    served: dict[str, float] = {r.id: 0.0 for r in demand.records}
    production: dict[str, float] = {}
    breakdown = {k: 0.0 for k in BREAKDOWN_KEYS}

    for key, value in zip(program.variables, x):
        units = _clamp(value)
        if key[0] == "x":
            _, lane_id, material_id = key
            if units > 0.0:
                flows.append(Flow(lane_id, material_id, units))
            lane = network.lanes[lane_id]
            supplier = network.suppliers[lane.origin]
            breakdown["material"] += units * supplier.unit_price
            breakdown["inbound_shipping"] += units * lane.unit_ship_cost
        elif key[0] == "y":
            _, lane_id, record_id = key
            lane = network.lanes[lane_id]
            factory = network.factories[lane.origin]
            record = records[record_id]
            if units > 0.0:
                flows.append(Flow(lane_id, record_id, units))
                production[factory.id] = production.get(factory.id, 0.0) + units
            served[record_id] += units
            breakdown["production"] += units * factory.production_cost
            breakdown["outbound_shipping"] += units * lane.unit_ship_cost
            breakdown["delay"] += (
                units * network.delay_days(lane.lead_time, record.due_day) * record.delay_cost_rate
            )

    lost: dict[str, float] = {}
    for record in demand.records:
        shortfall = _clamp(record.quantity - served[record.id])
        if shortfall > 0.0:
            lost[record.id] = shortfall
            breakdown["lost_penalty"] += shortfall * record.lost_penalty

    total = sum(breakdown.values())
    return FulfillmentPlan(
        status="optimal",
        flows=tuple(flows),
        production=production,
        lost=lost,
        cost_breakdown=breakdown,
        total_cost=total,
        record_ids=tuple(sorted(records)),
        lane_ids=tuple(sorted(network.lanes)),
    )


def solve(network: SupplyNetwork, demand: DemandPlan) -> FulfillmentPlan:
    """Solve the instance to a cost-minimal fulfillment plan.

    Pure and deterministic: identical inputs produce identical plans.
    """
    issues = [i for i in validate(network, demand) if i.severity == "error"]
    if issues:
        raise SolverInputError(issues)

    program = build_program(network, demand)
    if not program.variables:
        return FulfillmentPlan(
            status="optimal", flows=(), production={}, lost={},
            cost_breakdown={k: 0.0 for k in BREAKDOWN_KEYS}, total_cost=0.0,
            record_ids=tuple(sorted(r.id for r in demand.records)),
            lane_ids=tuple(sorted(network.lanes)),
        )

    result = linprog(
        program.c,
        A_ub=program.a_ub if program.a_ub.size else None,
        b_ub=program.b_ub if program.b_ub.size else None,
        A_eq=program.a_eq if program.a_eq.size else None,
        b_eq=program.b_eq if program.b_eq.size else None,
        bounds=list(program.bounds),
        method="highs",
    )
    if not result.success:  # lost slack keeps every valid instance feasible
        raise SolverInputError([type("I", (), {"message": result.message, "severity": "error"})()])
    return _extract_plan(network, demand, program, result.x)


def diff_plans(base: FulfillmentPlan, alt: FulfillmentPlan) -> PlanDiff:
    """Component-wise comparison of two plans over the same dataset universe."""
    if base.record_ids != alt.record_ids:
        raise PlanUniverseError("plans cover different demand records")
    if not set(base.lane_ids) <= set(alt.lane_ids):
        raise PlanUniverseError("base plan has lanes unknown to the alternative plan")

    delta_by_component = {
        k: alt.cost_breakdown.get(k, 0.0) - base.cost_breakdown.get(k, 0.0)
        for k in BREAKDOWN_KEYS
    }

    base_units = base.lane_units()
    alt_units = alt.lane_units()
    changed: list[tuple[str, float, float]] = []
    for lane in sorted(set(base_units) | set(alt_units)):
        b = base_units.get(lane, 0.0)
        a = alt_units.get(lane, 0.0)
        if abs(a - b) > FEASIBILITY_TOL:
            changed.append((lane, b, a))

    delta_lost: dict[str, float] = {}
    for record in base.record_ids:
        d = alt.lost.get(record, 0.0) - base.lost.get(record, 0.0)
        if abs(d) > FEASIBILITY_TOL:
            delta_lost[record] = d

    base_lost_total = sum(base.lost.values())
    alt_lost_total = sum(alt.lost.values())
    if base_lost_total <= FEASIBILITY_TOL and alt_lost_total <= FEASIBILITY_TOL:
        note = "Both plans serve all demand."
    elif alt_lost_total > base_lost_total + FEASIBILITY_TOL:
        note = (f"The modified plan loses {alt_lost_total - base_lost_total:g} more units "
                f"of demand than the baseline.")
    elif base_lost_total > alt_lost_total + FEASIBILITY_TOL:
        note = (f"The modified plan recovers {base_lost_total - alt_lost_total:g} units "
                f"of demand lost in the baseline.")
    else:
        note = f"Both plans lose {alt_lost_total:g} units of demand."

    return PlanDiff(
        base_total=base.total_cost,
        alt_total=alt.total_cost,
        delta_total=alt.total_cost - base.total_cost,
        delta_by_component=delta_by_component,
        changed_flows=tuple(changed),
        delta_lost=delta_lost,
        feasibility_note=note,
    )


def _round6(value: float) -> float:
    return round(value, 6)


def plan_to_dict(plan: FulfillmentPlan) -> dict[str, Any]:
    """Export form consumed by the service and console; currency rounded half-even to 6 places."""
    return {
        "status": plan.status,
        "flows": [
            {"lane": f.lane, "item": f.item, "units": _round6(f.units)} for f in plan.flows
        ],
        "production": {k: _round6(v) for k, v in sorted(plan.production.items())},
        "lost": {k: _round6(v) for k, v in sorted(plan.lost.items())},
        "cost_breakdown": {k: _round6(plan.cost_breakdown[k]) for k in BREAKDOWN_KEYS},
        "total_cost": _round6(plan.total_cost),
    }


def diff_to_dict(diff: PlanDiff) -> dict[str, Any]:
    return {
        "base_total": _round6(diff.base_total),
        "alt_total": _round6(diff.alt_total),
        "delta_total": _round6(diff.delta_total),
        "delta_by_component": {k: _round6(v) for k, v in diff.delta_by_component.items()},
        "changed_flows": [
            {"lane": lane, "base_units": _round6(b), "alt_units": _round6(a)}
            for lane, b, a in diff.changed_flows
        ],
        "delta_lost": {k: _round6(v) for k, v in sorted(diff.delta_lost.items())},
        "feasibility_note": diff.feasibility_note,
    }


__all__ = [
    "FEASIBILITY_TOL", "OPTIMALITY_TOL", "BREAKDOWN_KEYS",
    "SolverInputError", "PlanUniverseError",
    "Flow", "FlowProgram", "FulfillmentPlan", "PlanDiff",
    "build_program", "solve", "diff_plans", "plan_to_dict", "diff_to_dict",
]
