"""Demand-plan drift: diff two snapshots, attribute and classify every change, render the report."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any

from .model import DemandPlan, DemandRecord, DuplicateIdError

CATEGORIES = (
    "hardware-generation-efficiency",
    "customer-reduction",
    "demand-growth",
    "reallocation",
    "unclassified",
)

DEFAULT_HARDWARE_KEYS = frozenset({"hw", "hardware", "hardware_type", "generation"})


@dataclass(frozen=True)
class DriftConfig:
    large_swing_fraction: float = 0.5  # |delta| above this share of the prior quantity flags review
    hardware_attr_keys: frozenset = DEFAULT_HARDWARE_KEYS
    region_attr_key: str = "region"


@dataclass(frozen=True)
class ChangeRecord:
    record_id: str
    kind: str  # added | removed | modified
    qty_before: float | None
    qty_after: float | None
    qty_delta: float
    due_delta: int
    attr_changes: dict[str, tuple[str | None, str | None]]
    retailer_change: tuple[str, str] | None
    product_change: tuple[str, str] | None
    author: str
    note: str
    category: str
    flags: tuple[str, ...]


@dataclass(frozen=True)
class RegionAggregate:
    region: str
    before: float
    after: float
    delta: float


@dataclass(frozen=True)
class DriftReport:
    snapshot_a: str
    snapshot_b: str
    regions: tuple[RegionAggregate, ...]
    changes: tuple[ChangeRecord, ...]
    flagged: tuple[str, ...]
    total_before: float
    total_after: float
    total_delta: float
    counts: dict[str, int]


def _natural_key(record_id: str) -> tuple:
    parts = re.split(r"(\d+)", record_id)
    return tuple(int(p) if p.isdigit() else p for p in parts)


def _check_unique(plan: DemandPlan) -> dict[str, DemandRecord]:
    seen: dict[str, DemandRecord] = {}
    for r in plan.records:
        if r.id in seen:
            raise DuplicateIdError(r.id, f"snapshot {plan.snapshot_id}")
        seen[r.id] = r
    return seen


def _classify(kind: str, qty_delta: float,
              attr_changes: dict[str, tuple[str | None, str | None]],
              retailer_change, product_change, config: DriftConfig) -> str:
    if kind == "added":
        return "demand-growth"
    if kind == "removed":
        return "customer-reduction"
    hardware_changed = product_change is not None or any(
        key in config.hardware_attr_keys for key in attr_changes)
    region_changed = retailer_change is not None or config.region_attr_key in attr_changes
    if qty_delta < 0 and hardware_changed:
        return "hardware-generation-efficiency"
    if qty_delta < 0 and not attr_changes and retailer_change is None and product_change is None:
        return "customer-reduction"
    if qty_delta > 0:
        return "demand-growth"
    if qty_delta == 0 and region_changed:
        return "reallocation"
    return "unclassified"


def _flags(kind: str, qty_before: float | None, qty_delta: float,
           meta_record: DemandRecord, config: DriftConfig) -> tuple[str, ...]:
    flags: list[str] = []
    if not meta_record.modified_by or not meta_record.change_note:
        flags.append("missing-metadata")
    if kind == "modified" and qty_before is not None:
        if abs(qty_delta) > config.large_swing_fraction * qty_before:
            flags.append("large-swing")
    return tuple(flags)


def compute_drift(a: DemandPlan, b: DemandPlan,
                  config: DriftConfig = DriftConfig()) -> DriftReport:
    """Record-level diff of two snapshots with root-cause categories and review flags."""
    a_records = _check_unique(a)
    b_records = _check_unique(b)
    region_key = config.region_attr_key

    changes: list[ChangeRecord] = []
    unchanged = 0

    for rid in sorted(set(a_records) | set(b_records), key=_natural_key):
        before = a_records.get(rid)
        after = b_records.get(rid)

        if before is None and after is not None:
            kind = "added"
            qty_delta = after.quantity
            change = ChangeRecord(
                record_id=rid, kind=kind, qty_before=None, qty_after=after.quantity,
                qty_delta=qty_delta, due_delta=0, attr_changes={},
                retailer_change=None, product_change=None,
                author=after.modified_by, note=after.change_note,
                category=_classify(kind, qty_delta, {}, None, None, config),
                flags=_flags(kind, None, qty_delta, after, config),
            )
            changes.append(change)
            continue

        if after is None and before is not None:
            kind = "removed"
            qty_delta = -before.quantity
            change = ChangeRecord(
                record_id=rid, kind=kind, qty_before=before.quantity, qty_after=None,
                qty_delta=qty_delta, due_delta=0, attr_changes={},
                retailer_change=None, product_change=None,
                author=before.modified_by, note=before.change_note,
                category=_classify(kind, qty_delta, {}, None, None, config),
                flags=_flags(kind, before.quantity, qty_delta, before, config),
            )
            changes.append(change)
            continue

        assert before is not None and after is not None
        attr_changes: dict[str, tuple[str | None, str | None]] = {}
        for key in sorted(set(before.attributes) | set(after.attributes)):
            old = before.attributes.get(key)
            new = after.attributes.get(key)
            if old != new:
                attr_changes[key] = (old, new)
        retailer_change = ((before.retailer, after.retailer)
                           if before.retailer != after.retailer else None)
        product_change = ((before.product, after.product)
                          if before.product != after.product else None)
        qty_delta = after.quantity - before.quantity
        due_delta = after.due_day - before.due_day

        if (qty_delta == 0 and due_delta == 0 and not attr_changes
                and retailer_change is None and product_change is None):
            unchanged += 1
            continue

        kind = "modified"
        change = ChangeRecord(
            record_id=rid, kind=kind, qty_before=before.quantity, qty_after=after.quantity,
            qty_delta=qty_delta, due_delta=due_delta, attr_changes=attr_changes,
            retailer_change=retailer_change, product_change=product_change,
            author=after.modified_by, note=after.change_note,
            category=_classify(kind, qty_delta, attr_changes, retailer_change,
                               product_change, config),
            flags=_flags(kind, before.quantity, qty_delta, after, config),
        )
        changes.append(change)

    region_before: dict[str, float] = {}
    region_after: dict[str, float] = {}
    for r in a.records:
        region = r.attributes.get(region_key, "(none)")
        region_before[region] = region_before.get(region, 0.0) + r.quantity
    for r in b.records:
        region = r.attributes.get(region_key, "(none)")
        region_after[region] = region_after.get(region, 0.0) + r.quantity

    regions = tuple(
        RegionAggregate(
            region=region,
            before=region_before.get(region, 0.0),
            after=region_after.get(region, 0.0),
            delta=region_after.get(region, 0.0) - region_before.get(region, 0.0),
        )
        for region in sorted(set(region_before) | set(region_after))
    )

    total_before = sum(r.quantity for r in a.records)
    total_after = sum(r.quantity for r in b.records)
    counts = {
        "added": sum(1 for c in changes if c.kind == "added"),
        "removed": sum(1 for c in changes if c.kind == "removed"),
        "modified": sum(1 for c in changes if c.kind == "modified"),
        "unchanged": unchanged,
    }
    return DriftReport(
        snapshot_a=a.snapshot_id, snapshot_b=b.snapshot_id,
        regions=regions, changes=tuple(changes),
        flagged=tuple(c.record_id for c in changes if c.flags),
        total_before=total_before, total_after=total_after,
        total_delta=total_after - total_before, counts=counts,
    )


def _qty(value: float) -> str:
    return f"{value:g}"


def _change_line(c: ChangeRecord) -> str:
    author = c.author if c.author else "(unknown)"
    if c.kind == "added":
        body = f"quantity {_qty(c.qty_after or 0.0)}"
    elif c.kind == "removed":
        body = f"quantity was {_qty(c.qty_before or 0.0)}"
    else:
        body = (f"quantity {_qty(c.qty_before or 0.0)} -> {_qty(c.qty_after or 0.0)} "
                f"({c.qty_delta:+g})")
    parts = [f"{c.record_id} {c.kind} by {author} [{c.category}]: {body}"]
    for key, (old, new) in c.attr_changes.items():
        parts.append(f"{key}: {old or '(none)'} -> {new or '(none)'}")
    if c.retailer_change:
        parts.append(f"retailer: {c.retailer_change[0]} -> {c.retailer_change[1]}")
    if c.product_change:
        parts.append(f"product: {c.product_change[0]} -> {c.product_change[1]}")
    if c.due_delta:
        parts.append(f"due day shifted by {c.due_delta:+d}")
    if c.note:
        parts.append(f'note: "{c.note}"')
    if c.flags:
        parts.append(f"flags: {', '.join(c.flags)}")
    return "; ".join(parts)


def render_report(report: DriftReport, format: str = "markdown") -> str:
    """Deterministic report document; byte-stable for golden comparison."""
    if format not in ("markdown", "email-text"):
        raise ValueError(f"unknown format {format!r}")
    md = format == "markdown"
    lines: list[str] = []

    if md:
        lines.append(f"# Demand drift: {report.snapshot_a} -> {report.snapshot_b}")
    else:
        lines.append(f"DEMAND DRIFT: {report.snapshot_a} -> {report.snapshot_b}")
    lines.append("")

    if not report.changes:
        lines.append("No changes between snapshots.")
        return "\n".join(lines) + "\n"

    lines.append(
        f"Total quantity {_qty(report.total_before)} -> {_qty(report.total_after)} "
        f"({report.total_delta:+g}). "
        f"{report.counts['added']} added, {report.counts['removed']} removed, "
        f"{report.counts['modified']} modified, {report.counts['unchanged']} unchanged.")
    lines.append("")

    lines.append("## Demand by region" if md else "DEMAND BY REGION")
    lines.append("")
    if md:
        lines.append("| Region | Before | After | Delta |")
        lines.append("| --- | ---: | ---: | ---: |")
        for agg in report.regions:
            lines.append(f"| {agg.region} | {_qty(agg.before)} | {_qty(agg.after)} "
                         f"| {agg.delta:+g} |")
    else:
        for agg in report.regions:
            lines.append(f"  {agg.region}: {_qty(agg.before)} -> {_qty(agg.after)} "
                         f"({agg.delta:+g})")
    lines.append("")

    lines.append("## Changes" if md else "CHANGES")
    lines.append("")
    for c in report.changes:
        lines.append(f"- {_change_line(c)}")
    lines.append("")

    if report.flagged:
        lines.append("## Flagged for review" if md else "FLAGGED FOR REVIEW")
        lines.append("")
        for c in report.changes:
            if c.flags:
                lines.append(f"- {c.record_id}: {', '.join(c.flags)}")
        lines.append("")

    return "\n".join(lines)


def report_to_dict(report: DriftReport) -> dict[str, Any]:
    return {
        "snapshot_a": report.snapshot_a,
        "snapshot_b": report.snapshot_b,
        "total_before": report.total_before,
        "total_after": report.total_after,
        "total_delta": report.total_delta,
        "counts": dict(report.counts),
        "regions": [
            {"region": a.region, "before": a.before, "after": a.after, "delta": a.delta}
            for a in report.regions
        ],
        "changes": [
            {
                "record_id": c.record_id, "kind": c.kind,
                "qty_before": c.qty_before, "qty_after": c.qty_after,
                "qty_delta": c.qty_delta, "due_delta": c.due_delta,
                "attr_changes": {k: list(v) for k, v in c.attr_changes.items()},
                "retailer_change": list(c.retailer_change) if c.retailer_change else None,
                "product_change": list(c.product_change) if c.product_change else None,
                "author": c.author, "note": c.note,
                "category": c.category, "flags": list(c.flags),
            }
            for c in report.changes
        ],
        "flagged": list(report.flagged),
    }


__all__ = [
    "CATEGORIES", "DriftConfig", "ChangeRecord", "RegionAggregate", "DriftReport",
    "compute_drift", "render_report", "report_to_dict",
]
