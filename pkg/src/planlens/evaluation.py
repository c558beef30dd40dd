"""Question-bank evaluation: execution-level grading, accuracy and fallback tracking."""

from __future__ import annotations

import json
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from . import dsl
from .insights import QueryResult
from .pipeline import Answer, PlannerSession, TranslatorBackend, answer
from .solver import PlanDiff

DIFFICULTIES = ("standard", "grammar-noise", "atypical")
OUTCOMES = ("correct", "incorrect", "fallback", "clarification")
DEFAULT_TOLERANCE = 1e-6


class BankFormatError(Exception):
    pass


@dataclass(frozen=True)
class Fact:
    value: Any
    tolerance: float = DEFAULT_TOLERANCE

    def matches(self, actual: Any) -> bool:
        if isinstance(self.value, (int, float)) and not isinstance(self.value, bool):
            if not isinstance(actual, (int, float)) or isinstance(actual, bool):
                return False
            return abs(float(actual) - float(self.value)) <= self.tolerance
        return actual == self.value


@dataclass(frozen=True)
class BankItem:
    id: str
    question: str
    expected_dsl: str | None = None
    expected_facts: dict[str, Fact] = field(default_factory=dict)
    difficulty: str = "standard"

    def expects_kind(self, kind: str) -> bool:
        fact = self.expected_facts.get("answer_kind")
        return fact is not None and fact.value == kind


def load_eval_bank(path: str | Path) -> tuple[BankItem, ...]:
    """One JSON record per line: id, question, expected_dsl and/or expected_facts, difficulty."""
    items: list[BankItem] = []
    seen: set[str] = set()
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BankFormatError(f"line {line_no}: invalid JSON: {exc}") from None
        item_id = doc.get("id")
        question = doc.get("question")
        if not item_id or not question:
            raise BankFormatError(f"line {line_no}: id and question are required")
        if item_id in seen:
            raise BankFormatError(f"line {line_no}: duplicate item id {item_id}")
        seen.add(item_id)
        facts: dict[str, Fact] = {}
        for name, raw in (doc.get("expected_facts") or {}).items():
            if isinstance(raw, dict) and "value" in raw:
                facts[name] = Fact(raw["value"], float(raw.get("tol", DEFAULT_TOLERANCE)))
            else:
                facts[name] = Fact(raw)
        expected_dsl = doc.get("expected_dsl")
        if expected_dsl is None and not facts:
            raise BankFormatError(
                f"line {line_no}: item {item_id} needs expected_dsl or expected_facts")
        difficulty = doc.get("difficulty", "standard")
        if difficulty not in DIFFICULTIES:
            raise BankFormatError(f"line {line_no}: unknown difficulty {difficulty!r}")
        items.append(BankItem(id=item_id, question=question, expected_dsl=expected_dsl,
                              expected_facts=facts, difficulty=difficulty))
    if not items:
        raise BankFormatError(f"{path}: bank is empty")
    return tuple(items)


def extract_facts(result: Answer) -> dict[str, Any]:
    """Flatten an answer into named facts for execution-level matching."""
    facts: dict[str, Any] = {"answer_kind": result.kind}
    s = result.structured
    if isinstance(s, PlanDiff):
        facts["delta_total"] = s.delta_total
        facts["base_total"] = s.base_total
        facts["alt_total"] = s.alt_total
        for key, value in s.delta_by_component.items():
            facts[f"delta_{key}"] = value
        facts["lost_units_delta"] = sum(s.delta_lost.values())
        for record, value in s.delta_lost.items():
            facts[f"delta_lost[{record}]"] = value
    elif isinstance(s, QueryResult):
        facts["value"] = s.value
        facts["form"] = s.form
    return facts


def match_result(actual: Answer, expected: BankItem) -> str:
    """Outcome for one item. Facts are matched at tolerance; the raw script text is
    compared (canonically) only when no facts are given."""
    if actual.kind == "fallback":
        return "fallback"
    if actual.kind == "clarification":
        return "clarification"
    if expected.expected_facts:
        facts = extract_facts(actual)
        for name, fact in expected.expected_facts.items():
            if name not in facts or not fact.matches(facts[name]):
                return "incorrect"
        return "correct"
    try:
        canonical = dsl.render(dsl.parse(expected.expected_dsl or ""))
    except dsl.ScenarioError as exc:
        raise BankFormatError(f"item {expected.id}: expected_dsl does not parse: {exc}") from None
    return "correct" if actual.dsl == canonical else "incorrect"


@dataclass(frozen=True)
class ItemOutcome:
    item_id: str
    outcome: str
    difficulty: str
    latency_s: float
    answer_kind: str
    dsl: str | None
    expected_facts: dict[str, Any]
    actual_facts: dict[str, Any]


@dataclass(frozen=True)
class EvalReport:
    outcomes: tuple[ItemOutcome, ...]
    total: int
    counts: dict[str, int]
    accuracy: float
    fallback_rate: float
    latency: dict[str, float]
    by_difficulty: dict[str, dict[str, int]]


def _assemble_report(outcomes: list[ItemOutcome]) -> EvalReport:
    counts = {o: 0 for o in OUTCOMES}
    for outcome in outcomes:
        counts[outcome.outcome] += 1
    graded = len(outcomes) - counts["clarification"]
    accuracy = counts["correct"] / graded if graded else 1.0
    fallback_rate = counts["fallback"] / graded if graded else 0.0
    latencies = [o.latency_s for o in outcomes]
    by_difficulty: dict[str, dict[str, int]] = {}
    for outcome in outcomes:
        bucket = by_difficulty.setdefault(outcome.difficulty, {o: 0 for o in OUTCOMES})
        bucket[outcome.outcome] += 1
    return EvalReport(
        outcomes=tuple(outcomes),
        total=len(outcomes),
        counts=counts,
        accuracy=accuracy,
        fallback_rate=fallback_rate,
        latency={
            "mean_s": statistics.fmean(latencies) if latencies else 0.0,
            "min_s": min(latencies) if latencies else 0.0,
            "max_s": max(latencies) if latencies else 0.0,
        },
        by_difficulty=by_difficulty,
    )


def run_eval(bank: tuple[BankItem, ...] | list[BankItem],
             session_template: Callable[[], PlannerSession]) -> EvalReport:
    """Run every bank item in a fresh session and grade the executed answers."""
    if not bank:
        raise BankFormatError("bank is empty")
    outcomes: list[ItemOutcome] = []
    for item in bank:
        session = session_template()
        started = time.monotonic()
        result = answer(session, item.question)
        latency = time.monotonic() - started
        outcome = match_result(result, item)
        outcomes.append(ItemOutcome(
            item_id=item.id, outcome=outcome, difficulty=item.difficulty,
            latency_s=latency, answer_kind=result.kind, dsl=result.dsl,
            expected_facts={k: f.value for k, f in item.expected_facts.items()},
            actual_facts=extract_facts(result),
        ))
    return _assemble_report(outcomes)


class FaultInjectingBackend:
    """Wraps a backend and corrupts every nth completion into a valid but wrong script."""

    def __init__(self, inner: TranslatorBackend, every: int = 10,
                 corrupt_text: str = "SCALE DEMAND ALL BY 9.99") -> None:
        self.inner = inner
        self.every = every
        self.corrupt_text = corrupt_text
        self.calls = 0
        self.id = f"fault-injecting({inner.id}, 1/{every})"

    def complete(self, prompt: str) -> str:
        self.calls += 1
        if self.calls % self.every == 0:
            return self.corrupt_text
        return self.inner.complete(prompt)


def report_to_dict(report: EvalReport) -> dict[str, Any]:
    return {
        "total": report.total,
        "counts": dict(report.counts),
        "accuracy": report.accuracy,
        "fallback_rate": report.fallback_rate,
        "latency": dict(report.latency),
        "by_difficulty": {k: dict(v) for k, v in report.by_difficulty.items()},
        "outcomes": [
            {
                "item_id": o.item_id, "outcome": o.outcome, "difficulty": o.difficulty,
                "latency_s": o.latency_s, "answer_kind": o.answer_kind, "dsl": o.dsl,
                "expected_facts": o.expected_facts, "actual_facts": o.actual_facts,
            }
            for o in report.outcomes
        ],
    }


def summary_table(report: EvalReport) -> str:
    lines = [
        f"items: {report.total}",
        f"accuracy: {report.accuracy:.3f}   fallback rate: {report.fallback_rate:.3f}",
        "outcome    count",
        "---------  -----",
    ]
    for outcome in OUTCOMES:
        lines.append(f"{outcome:<9s}  {report.counts[outcome]:5d}")
    lines.append("")
    lines.append("difficulty     correct incorrect fallback clarification")
    for difficulty, bucket in sorted(report.by_difficulty.items()):
        lines.append(
            f"{difficulty:<14s} {bucket['correct']:7d} {bucket['incorrect']:9d} "
            f"{bucket['fallback']:8d} {bucket['clarification']:13d}")
    return "\n".join(lines)


__all__ = [
    "DIFFICULTIES", "OUTCOMES", "DEFAULT_TOLERANCE", "BankFormatError",
    "Fact", "BankItem", "load_eval_bank", "extract_facts", "match_result",
    "ItemOutcome", "EvalReport", "run_eval", "FaultInjectingBackend",
    "report_to_dict", "summary_table",
]
