"""Exhaustive integer-flow enumeration: an independent optimum for small instances.

Test support. Enumerates every integral assignment of demand units to factories
(or to lost demand) and every integral material sourcing, so it shares no
machinery with the LP path. Valid when quantities and capacities are integral
and every bom entry is 1, which makes an integral optimum exist.
"""

from __future__ import annotations

from dataclasses import replace
from functools import lru_cache
from typing import Iterator

from .model import DemandPlan, SupplyNetwork
from .solver import BREAKDOWN_KEYS, Flow, FulfillmentPlan

DEFAULT_MAX_UNITS = 8


class OracleBoundError(Exception):
    """Instance exceeds what exhaustive enumeration can cover."""


class OraclePreconditionError(Exception):
    """Instance shape outside the oracle's validity domain (non-integral data or bom != 1)."""


def _compositions(total: int, caps: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    """All tuples of non-negative ints summing to total with per-slot caps."""
    if not caps:
        if total == 0:
            yield ()
        return
    head_cap = min(caps[0], total)
    rest = caps[1:]
    rest_room = sum(rest)
    for first in range(head_cap + 1):
        if total - first > rest_room:
            continue
        for tail in _compositions(total - first, rest):
            yield (first,) + tail


def _allocations(total: int, caps: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    """All tuples of non-negative ints with sum <= total and per-slot caps."""
    if not caps:
        yield ()
        return
    head_cap = min(caps[0], total)
    for first in range(head_cap + 1):
        for tail in _allocations(total - first, caps[1:]):
            yield (first,) + tail


def _check_preconditions(network: SupplyNetwork, demand: DemandPlan, max_units: int) -> None:
    total = sum(r.quantity for r in demand.records)
    if total > max_units:
        raise OracleBoundError(
            f"total demand {total:g} exceeds the enumeration bound of {max_units} units")
    for r in demand.records:
        if not float(r.quantity).is_integer():
            raise OraclePreconditionError(f"record {r.id} quantity {r.quantity} is not integral")
    for p in network.products.values():
        for mat, units in p.bom.items():
            if units != 1.0:
                raise OraclePreconditionError(f"product {p.id} bom[{mat}] = {units}, expected 1")
    for s in network.suppliers.values():
        if not (float(s.capacity).is_integer() and float(s.inventory).is_integer()):
            raise OraclePreconditionError(f"supplier {s.id} has non-integral capacity/inventory")
    for f in network.factories.values():
        if not float(f.production_capacity).is_integer():
            raise OraclePreconditionError(f"factory {f.id} has non-integral capacity")
    for lane in network.lanes.values():
        if not float(lane.capacity).is_integer():
            raise OraclePreconditionError(f"lane {lane.id} has non-integral capacity")


def oracle_solve(network: SupplyNetwork, demand: DemandPlan,
                 max_units: int = DEFAULT_MAX_UNITS) -> FulfillmentPlan:
    """Minimum-cost plan by brute force over integer flows."""
    _check_preconditions(network, demand, max_units)

    records = sorted(demand.records, key=lambda r: r.id)
    rec_by_id = {r.id: r for r in records}
    factories = sorted(network.factories.values(), key=lambda f: f.id)

    # Per record: usable factories (active, active lane to the retailer) and per-unit serve cost.
    rec_options: list[list[tuple[str, str, float, int]]] = []  # (factory, lane, cost, lane cap)
    for r in records:
        options = []
        for f in factories:
            if not f.active:
                continue
            lane = network.lane_between(f.id, r.retailer)
            if lane is None or not lane.active:
                continue
            unit_cost = (
                f.production_cost + lane.unit_ship_cost
                + network.delay_days(lane.lead_time, r.due_day) * r.delay_cost_rate
            )
            options.append((f.id, lane.id, unit_cost, int(lane.capacity)))
        rec_options.append(options)

    supplier_ids = sorted(s.id for s in network.suppliers.values())

    @lru_cache(maxsize=None)
    def material_cost(material: str, reqs: tuple[tuple[str, int], ...]):
        """Cheapest integral sourcing of `reqs` (factory, units) for one material.

        Returns (cost, ((lane_id, units), ...)) or None when infeasible.
        """
        routes_per_factory = []
        for fac, req in reqs:
            routes = []
            for sid in supplier_ids:
                s = network.suppliers[sid]
                if s.material != material or not s.active:
                    continue
                lane = network.lane_between(sid, fac)
                if lane is None or not lane.active:
                    continue
                routes.append((sid, lane.id, s.unit_price + lane.unit_ship_cost,
                               int(lane.capacity)))
            routes_per_factory.append((fac, req, routes))

        limits = {sid: int(min(network.suppliers[sid].capacity, network.suppliers[sid].inventory))
                  if network.suppliers[sid].active else 0
                  for sid in supplier_ids}

        best: list = [None]

        def recurse(idx: int, used: dict[str, int], cost: float, picked: list):
            if best[0] is not None and cost >= best[0][0]:
                return
            if idx == len(routes_per_factory):
                if best[0] is None or cost < best[0][0]:
                    best[0] = (cost, tuple(picked))
                return
            fac, req, routes = routes_per_factory[idx]
            caps = tuple(max(0, min(cap, limits[sid] - used.get(sid, 0)))
                         for sid, _, _, cap in routes)
            for combo in _compositions(req, caps):
                extra = sum(u * c for u, (_, _, c, _) in zip(combo, routes))
                for u, (sid, _, _, _) in zip(combo, routes):
                    if u:
                        used[sid] = used.get(sid, 0) + u
                for u, (_, lane_id, _, _) in zip(combo, routes):
                    if u:
                        picked.append((lane_id, u))
                recurse(idx + 1, used, cost + extra, picked)
                for u, (_, lane_id, _, _) in zip(combo, routes):
                    if u:
                        picked.pop()
                for u, (sid, _, _, _) in zip(combo, routes):
                    if u:
                        used[sid] = used.get(sid, 0) - u

        recurse(0, {}, 0.0, [])
        return best[0]

    best_plan: list = [None]  # (total cost, y flows, material flows)

    fac_cap = {f.id: int(f.production_capacity) if f.active else 0 for f in factories}
    lane_cap = {l.id: int(l.capacity) for l in network.lanes.values()}

    def assign(rec_idx: int, fac_used: dict[str, int], lane_used: dict[str, int],
               serve_cost: float, y_flows: list):
        if best_plan[0] is not None and serve_cost >= best_plan[0][0]:
            return
        if rec_idx == len(records):
            # Materials needed at each factory: with bom = 1, one unit per produced unit
            # for every material in the product's bom.
            reqs: dict[str, dict[str, int]] = {}
            for lane_id, rec_id, units in y_flows:
                fac = network.lanes[lane_id].origin
                product = network.products[rec_by_id[rec_id].product]
                for mat in product.bom:
                    reqs.setdefault(mat, {})
                    reqs[mat][fac] = reqs[mat].get(fac, 0) + units
            total = serve_cost
            mat_flows: list[tuple[str, str, int]] = []
            for mat in sorted(reqs):
                by_fac = tuple(sorted(reqs[mat].items()))
                sourced = material_cost(mat, by_fac)
                if sourced is None:
                    return
                total += sourced[0]
                if best_plan[0] is not None and total >= best_plan[0][0]:
                    return
                mat_flows.extend((lane_id, mat, u) for lane_id, u in sourced[1])
            if best_plan[0] is None or total < best_plan[0][0]:
                best_plan[0] = (total, tuple(y_flows), tuple(mat_flows))
            return

        record = records[rec_idx]
        options = rec_options[rec_idx]
        q = int(record.quantity)
        caps = tuple(
            max(0, min(cap - lane_used.get(lane_id, 0), fac_cap[fac] - fac_used.get(fac, 0)))
            for fac, lane_id, _, cap in options
        )
        for served in _allocations(q, caps):
            lost = q - sum(served)
            extra = lost * record.lost_penalty + sum(
                u * cost for u, (_, _, cost, _) in zip(served, options))
            for u, (fac, lane_id, _, _) in zip(served, options):
                if u:
                    fac_used[fac] = fac_used.get(fac, 0) + u
                    lane_used[lane_id] = lane_used.get(lane_id, 0) + u
                    y_flows.append((lane_id, record.id, u))
            assign(rec_idx + 1, fac_used, lane_used, serve_cost + extra, y_flows)
            for u, (fac, lane_id, _, _) in zip(served, options):
                if u:
                    fac_used[fac] = fac_used.get(fac, 0) - u
                    lane_used[lane_id] = lane_used.get(lane_id, 0) - u
                    y_flows.pop()

    assign(0, {}, {}, 0.0, [])
    total, y_flows, mat_flows = best_plan[0]

    # Assemble the plan and recompute the breakdown from the chosen flows.
    breakdown = {k: 0.0 for k in BREAKDOWN_KEYS}
    flows: list[Flow] = []
    production: dict[str, float] = {}
    served_by_record: dict[str, int] = {r.id: 0 for r in records}

    for lane_id, mat, units in sorted(mat_flows):
        lane = network.lanes[lane_id]
        supplier = network.suppliers[lane.origin]
        flows.append(Flow(lane_id, mat, float(units)))
        breakdown["material"] += units * supplier.unit_price
        breakdown["inbound_shipping"] += units * lane.unit_ship_cost
    for lane_id, rec_id, units in sorted(y_flows):
        lane = network.lanes[lane_id]
        factory = network.factories[lane.origin]
        record = rec_by_id[rec_id]
        flows.append(Flow(lane_id, rec_id, float(units)))
        production[factory.id] = production.get(factory.id, 0.0) + units
        served_by_record[rec_id] += units
        breakdown["production"] += units * factory.production_cost
        breakdown["outbound_shipping"] += units * lane.unit_ship_cost
        breakdown["delay"] += (
            units * network.delay_days(lane.lead_time, record.due_day) * record.delay_cost_rate
        )

    lost: dict[str, float] = {}
    for r in records:
        shortfall = r.quantity - served_by_record[r.id]
        if shortfall > 0:
            lost[r.id] = float(shortfall)
            breakdown["lost_penalty"] += shortfall * r.lost_penalty

    return FulfillmentPlan(
        status="optimal",
        flows=tuple(flows),
        production=production,
        lost=lost,
        cost_breakdown=breakdown,
        total_cost=sum(breakdown.values()),
        record_ids=tuple(sorted(rec_by_id)),
        lane_ids=tuple(sorted(network.lanes)),
    )


def certified_route_optimum(network: SupplyNetwork, demand: DemandPlan) -> float | None:
    """Exact optimum by per-unit route enumeration, valid when no capacity binds.

    Every served unit costs at least its cheapest delivery route and every unit
    can instead be lost at its penalty, so sum(q_d * min(best_route_d, penalty_d))
    lower-bounds any feasible plan. Routing each record greedily down its best
    route attains that bound; if the greedy flows respect all capacities, the
    bound is the exact optimum. Returns None when the certificate fails, in
    which case the integer-enumeration oracle is the fallback.
    """
    supply_used: dict[str, float] = {}      # supplier id -> units
    supply_lane_used: dict[str, float] = {}
    fac_used: dict[str, float] = {}
    dist_lane_used: dict[str, float] = {}

    def cheapest_material(factory_id: str, material: str):
        best = None
        for s in sorted(network.suppliers_of(material), key=lambda s: s.id):
            if not s.active:
                continue
            lane = network.lane_between(s.id, factory_id)
            if lane is None or not lane.active:
                continue
            cost = s.unit_price + lane.unit_ship_cost
            if best is None or cost < best[0]:
                best = (cost, s.id, lane.id)
        return best

    total = 0.0
    for record in sorted(demand.records, key=lambda r: r.id):
        if record.quantity <= 0:
            continue
        product = network.products[record.product]
        best_route = None
        for f in sorted(network.factories.values(), key=lambda f: f.id):
            if not f.active:
                continue
            lane = network.lane_between(f.id, record.retailer)
            if lane is None or not lane.active:
                continue
            unit = (f.production_cost + lane.unit_ship_cost
                    + network.delay_days(lane.lead_time, record.due_day)
                    * record.delay_cost_rate)
            sourcing = []
            feasible = True
            for material, per_unit in product.bom.items():
                if per_unit == 0:
                    continue
                pick = cheapest_material(f.id, material)
                if pick is None:
                    feasible = False
                    break
                unit += per_unit * pick[0]
                sourcing.append((material, per_unit, pick[1], pick[2]))
            if feasible and (best_route is None or unit < best_route[0]):
                best_route = (unit, f.id, lane.id, sourcing)
        if best_route is None or record.lost_penalty < best_route[0]:
            total += record.quantity * record.lost_penalty
            continue
        unit, fac, lane_id, sourcing = best_route
        total += record.quantity * unit
        fac_used[fac] = fac_used.get(fac, 0.0) + record.quantity
        dist_lane_used[lane_id] = dist_lane_used.get(lane_id, 0.0) + record.quantity
        for material, per_unit, supplier_id, supply_lane in sourcing:
            amount = record.quantity * per_unit
            supply_used[supplier_id] = supply_used.get(supplier_id, 0.0) + amount
            supply_lane_used[supply_lane] = supply_lane_used.get(supply_lane, 0.0) + amount

    eps = 1e-9
    for fac, used in fac_used.items():
        if used > network.factories[fac].production_capacity + eps:
            return None
    for lane_id, used in dist_lane_used.items():
        if used > network.lanes[lane_id].capacity + eps:
            return None
    for lane_id, used in supply_lane_used.items():
        if used > network.lanes[lane_id].capacity + eps:
            return None
    for supplier_id, used in supply_used.items():
        if used > network.suppliers[supplier_id].supply_limit + eps:
            return None
    return total


def scale_quantities(network: SupplyNetwork, demand: DemandPlan, k: float,
                     ) -> tuple[SupplyNetwork, DemandPlan]:
    """Uniformly rescale every quantity-like field by k, leaving unit costs alone.

    The optimal cost of the rescaled instance is exactly k times the original
    (the program is homogeneous in its right-hand sides), which brings large
    fixtures into the oracle's enumeration range.
    """
    suppliers = {
        s.id: replace(s, capacity=s.capacity * k, inventory=s.inventory * k)
        for s in network.suppliers.values()
    }
    factories = {
        f.id: replace(f, production_capacity=f.production_capacity * k)
        for f in network.factories.values()
    }
    lanes = {l.id: replace(l, capacity=l.capacity * k) for l in network.lanes.values()}
    scaled_network = replace(network, suppliers=suppliers, factories=factories, lanes=lanes)
    records = tuple(replace(r, quantity=r.quantity * k) for r in demand.records)
    return scaled_network, replace(demand, records=records)


__all__ = [
    "DEFAULT_MAX_UNITS", "OracleBoundError", "OraclePreconditionError",
    "oracle_solve", "certified_route_optimum", "scale_quantities",
]
