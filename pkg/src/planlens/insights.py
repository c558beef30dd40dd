"""Read-only queries over dataset/plan/history, lead-time drift alarms, lane suggestions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable

from .model import DemandPlan, Lane, SupplyNetwork
from .solver import (
    BREAKDOWN_KEYS,
    FulfillmentPlan,
    PlanDiff,
    diff_plans,
    solve,
)

QUERY_METRICS = set(BREAKDOWN_KEYS) | {"total_cost", "shipping"}
COMPARATORS = {">", ">=", "<", "<="}


class QueryError(Exception):
    """Unknown entity or unusable period in a query."""


class InsufficientHistoryError(Exception):
    """History does not span the requested monitoring windows."""


@dataclass(frozen=True)
class Period:
    """Closed day-index interval; "last" periods anchor to the newest history day."""

    kind: str  # "last" | "range"
    a: int
    b: int = 0

    def resolve(self, latest_day: int) -> tuple[int, int]:
        if self.kind == "last":
            return latest_day - self.a + 1, latest_day
        return self.a, self.b


@dataclass(frozen=True)
class SupplierInventory:
    supplier: str
    material: str


@dataclass(frozen=True)
class CheapestLane:
    origin: str
    destination: str


@dataclass(frozen=True)
class ShipmentQuantity:
    product: str
    retailer: str


@dataclass(frozen=True)
class TopFactoryByOutput:
    period: Period


@dataclass(frozen=True)
class FractionPlansWhere:
    metric: str
    comparator: str
    threshold: float
    period: Period


QueryForm = (SupplierInventory, CheapestLane, ShipmentQuantity, TopFactoryByOutput,
             FractionPlansWhere)


@dataclass(frozen=True)
class QueryResult:
    form: str
    value: Any
    unit: str | None = None
    details: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ShipmentEvent:
    lane: str
    ship_day: int
    lead_time: float
    units: float = 0.0


@dataclass(frozen=True)
class PlanSummary:
    total_cost: float
    cost_breakdown: dict[str, float]
    production: dict[str, float]


@dataclass(frozen=True)
class HistoryEntry:
    day: int
    summary: PlanSummary
    shipments: tuple[ShipmentEvent, ...] = ()


class PlanHistory:
    """Append-only sequence of daily plan summaries with observed shipment lead times."""

    def __init__(self, entries: Iterable[HistoryEntry] = ()) -> None:
        self._entries: list[HistoryEntry] = []
        for e in entries:
            self.append(e)

    def append(self, entry: HistoryEntry) -> None:
        if self._entries and entry.day <= self._entries[-1].day:
            raise ValueError(
                f"history days must be strictly increasing, got {entry.day} "
                f"after {self._entries[-1].day}")
        self._entries.append(entry)

    @property
    def entries(self) -> tuple[HistoryEntry, ...]:
        return tuple(self._entries)

    @property
    def latest_day(self) -> int:
        if not self._entries:
            raise InsufficientHistoryError("history is empty")
        return self._entries[-1].day

    @property
    def earliest_day(self) -> int:
        if not self._entries:
            raise InsufficientHistoryError("history is empty")
        return self._entries[0].day

    def in_period(self, lo: int, hi: int) -> list[HistoryEntry]:
        return [e for e in self._entries if lo <= e.day <= hi]


def history_entry_to_dict(entry: HistoryEntry) -> dict[str, Any]:
    return {
        "day": entry.day,
        "summary": {
            "total_cost": entry.summary.total_cost,
            "cost_breakdown": dict(entry.summary.cost_breakdown),
            "production": dict(entry.summary.production),
        },
        "shipments": [
            {"lane": s.lane, "ship_day": s.ship_day, "lead_time": s.lead_time, "units": s.units}
            for s in entry.shipments
        ],
    }


def history_entry_from_dict(doc: dict[str, Any]) -> HistoryEntry:
    summary = doc.get("summary", {})
    return HistoryEntry(
        day=int(doc["day"]),
        summary=PlanSummary(
            total_cost=float(summary.get("total_cost", 0.0)),
            cost_breakdown={k: float(v) for k, v in summary.get("cost_breakdown", {}).items()},
            production={k: float(v) for k, v in summary.get("production", {}).items()},
        ),
        shipments=tuple(
            ShipmentEvent(
                lane=s["lane"], ship_day=int(s["ship_day"]),
                lead_time=float(s["lead_time"]), units=float(s.get("units", 0.0)),
            )
            for s in doc.get("shipments", [])
        ),
    )


def append_history(path: str | Path, entry: HistoryEntry) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(history_entry_to_dict(entry), sort_keys=True) + "\n")


def load_history(path: str | Path) -> PlanHistory:
    history = PlanHistory()
    p = Path(path)
    if not p.exists():
        return history
    for line in p.read_text(encoding="utf-8").splitlines():
        if line.strip():
            history.append(history_entry_from_dict(json.loads(line)))
    return history


@dataclass(frozen=True)
class Alert:
    kind: str  # "lead-time-drift" | "data-quality"
    subject: str
    recent_mean: float
    reference_mean: float
    predicted_arrival_day: float | None
    action: str


@dataclass(frozen=True)
class QueryState:
    network: SupplyNetwork
    demand: DemandPlan
    plan: FulfillmentPlan
    history: PlanHistory | None = None


def _metric_value(summary: PlanSummary, metric: str) -> float:
    if metric == "total_cost":
        return summary.total_cost
    if metric == "shipping":
        return (summary.cost_breakdown.get("inbound_shipping", 0.0)
                + summary.cost_breakdown.get("outbound_shipping", 0.0))
    return summary.cost_breakdown.get(metric, 0.0)


def run_query(q, state: QueryState) -> QueryResult:
    """Answer a query from local data only; exact, no side effects."""
    network = state.network

    if isinstance(q, SupplierInventory):
        supplier = network.suppliers.get(q.supplier)
        if supplier is None:
            raise QueryError(f"unknown supplier {q.supplier}")
        if q.material not in network.materials:
            raise QueryError(f"unknown material {q.material}")
        on_hand = supplier.inventory if supplier.material == q.material else 0.0
        return QueryResult(
            form="supplier_inventory", value=on_hand, unit="units",
            details={"supplier": q.supplier, "material": q.material},
        )

    if isinstance(q, CheapestLane):
        known = (set(network.suppliers) | set(network.factories) | set(network.retailers))
        if q.origin not in known:
            raise QueryError(f"unknown node {q.origin}")
        if q.destination not in known:
            raise QueryError(f"unknown node {q.destination}")
        candidates = [l for l in network.lanes.values()
                      if l.active and l.origin == q.origin and l.destination == q.destination]
        if not candidates:
            raise QueryError(f"no active lane from {q.origin} to {q.destination}")
        best = min(candidates, key=lambda l: (l.unit_ship_cost, l.id))
        return QueryResult(
            form="cheapest_lane", value=best.unit_ship_cost, unit="per unit",
            details={"lane": best.id, "origin": q.origin, "destination": q.destination,
                     "lead_time": best.lead_time},
        )

    if isinstance(q, ShipmentQuantity):
        if q.product not in network.products:
            raise QueryError(f"unknown product {q.product}")
        if q.retailer not in network.retailers:
            raise QueryError(f"unknown retailer {q.retailer}")
        records = {r.id: r for r in state.demand.records}
        total = 0.0
        for flow in state.plan.flows:
            record = records.get(flow.item)
            if record is None:
                continue
            lane = network.lanes.get(flow.lane)
            if (record.product == q.product and lane is not None
                    and lane.destination == q.retailer):
                total += flow.units
        return QueryResult(
            form="shipment_quantity", value=total, unit="units",
            details={"product": q.product, "retailer": q.retailer},
        )

    if isinstance(q, TopFactoryByOutput):
        entries = _entries_for_period(state, q.period)
        produced: dict[str, float] = {}
        for e in entries:
            for fac, units in e.summary.production.items():
                produced[fac] = produced.get(fac, 0.0) + units
        if not produced:
            raise QueryError("no production recorded in the period")
        peak = max(produced.values())
        top = min(f for f, units in produced.items() if units == peak)  # ties by factory id
        return QueryResult(
            form="top_factory", value=top, unit=None,
            details={"units": produced[top], "produced": dict(sorted(produced.items()))},
        )

    if isinstance(q, FractionPlansWhere):
        if q.metric not in QUERY_METRICS:
            raise QueryError(f"unknown metric {q.metric}")
        if q.comparator not in COMPARATORS:
            raise QueryError(f"unknown comparator {q.comparator}")
        entries = _entries_for_period(state, q.period)
        ops = {
            ">": lambda v: v > q.threshold,
            ">=": lambda v: v >= q.threshold,
            "<": lambda v: v < q.threshold,
            "<=": lambda v: v <= q.threshold,
        }
        matching = sum(1 for e in entries if ops[q.comparator](_metric_value(e.summary, q.metric)))
        fraction = matching / len(entries)
        return QueryResult(
            form="fraction_plans", value=fraction, unit=None,
            details={"matching": matching, "total": len(entries), "metric": q.metric,
                     "comparator": q.comparator, "threshold": q.threshold},
        )

    raise QueryError(f"unsupported query form {type(q).__name__}")


def _entries_for_period(state: QueryState, period: Period) -> list:
    if state.history is None or not state.history.entries:
        raise QueryError("no plan history available")
    lo, hi = period.resolve(state.history.latest_day)
    entries = state.history.in_period(lo, hi)
    if not entries:
        raise QueryError(f"no plans recorded between day {lo} and day {hi}")
    return entries


def monitor_lead_times(history: PlanHistory, window: int = 7, reference: int = 30,
                       min_ratio_increase: float = 0.25,
                       min_day_increase: float = 1.0) -> list[Alert]:
    """Alert on lanes whose recent mean lead time rose significantly vs the reference window.

    Recent window = last `window` days; reference window = the `reference` days before it.
    An alert fires only when the increase clears both thresholds.
    """
    if not history.entries:
        raise InsufficientHistoryError("history is empty")
    latest = history.latest_day
    span = latest - history.earliest_day + 1
    if span < window + reference:
        raise InsufficientHistoryError(
            f"history spans {span} days, need {window + reference} "
            f"(window {window} + reference {reference})")

    recent_lo = latest - window + 1
    ref_lo = recent_lo - reference

    recent: dict[str, list[ShipmentEvent]] = {}
    ref: dict[str, list[ShipmentEvent]] = {}
    for entry in history.entries:
        for ev in entry.shipments:
            if recent_lo <= ev.ship_day <= latest:
                recent.setdefault(ev.lane, []).append(ev)
            elif ref_lo <= ev.ship_day < recent_lo:
                ref.setdefault(ev.lane, []).append(ev)

    alerts: list[Alert] = []
    for lane in sorted(recent):
        events = recent[lane]
        bad = [e for e in events if e.lead_time <= 0]
        if bad:
            alerts.append(Alert(
                kind="data-quality", subject=lane,
                recent_mean=0.0, reference_mean=0.0, predicted_arrival_day=None,
                action=(f"{len(bad)} shipment(s) on lane {lane} report a non-positive "
                        f"lead time; review the event feed."),
            ))
            continue
        if lane not in ref:
            continue
        recent_mean = sum(e.lead_time for e in events) / len(events)
        ref_events = ref[lane]
        reference_mean = sum(e.lead_time for e in ref_events) / len(ref_events)
        if reference_mean <= 0:
            continue
        increase = recent_mean - reference_mean
        if increase >= min_day_increase and increase / reference_mean >= min_ratio_increase:
            last_ship = max(e.ship_day for e in events)
            predicted = last_ship + recent_mean
            alerts.append(Alert(
                kind="lead-time-drift", subject=lane,
                recent_mean=recent_mean, reference_mean=reference_mean,
                predicted_arrival_day=predicted,
                action=(f"Lead time on lane {lane} rose from {reference_mean:g} to "
                        f"{recent_mean:g} days; next arrival expected around day "
                        f"{predicted:g}. Consider re-running the plan with the new "
                        f"lead time."),
            ))
    return alerts


def suggest_improvements(state: QueryState, candidate_lanes: list[Lane],
                         ) -> list[tuple[Lane, PlanDiff]]:
    """Evaluate candidate lanes by re-solving; keep only strict cost reducers, best first.

    A candidate over an existing ordered pair replaces that lane's terms (one
    lane per pair), so duplicating an existing lane at equal cost yields delta 0
    and drops out.
    """
    results: list[tuple[Lane, PlanDiff]] = []
    for candidate in sorted(candidate_lanes, key=lambda l: l.id):
        lanes = dict(state.network.lanes)
        existing = state.network.lane_between(candidate.origin, candidate.destination)
        if existing is not None:
            lanes[existing.id] = replace(
                existing, unit_ship_cost=candidate.unit_ship_cost,
                capacity=candidate.capacity, lead_time=candidate.lead_time, active=True)
        else:
            lane_id = candidate.id
            while lane_id in lanes:
                lane_id += "_added"
            lanes[lane_id] = replace(candidate, id=lane_id)
        modified = replace(state.network, lanes=lanes)
        alt = solve(modified, state.demand)
        diff = diff_plans(state.plan, alt)
        if diff.delta_total < -1e-9:
            results.append((candidate, diff))
    results.sort(key=lambda pair: (pair[1].delta_total, pair[0].id))
    return results


__all__ = [
    "QUERY_METRICS", "COMPARATORS", "QueryError", "InsufficientHistoryError",
    "Period", "SupplierInventory", "CheapestLane", "ShipmentQuantity",
    "TopFactoryByOutput", "FractionPlansWhere", "QueryForm", "QueryResult",
    "ShipmentEvent", "PlanSummary", "HistoryEntry", "PlanHistory",
    "history_entry_to_dict", "history_entry_from_dict", "append_history", "load_history",
    "Alert", "QueryState", "run_query", "monitor_lead_times", "suggest_improvements",
]
