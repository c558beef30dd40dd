"""Question-to-answer orchestration: example selection, translation, execution, wording.

The translator backend is pluggable: a deterministic offline rule table covers
the supported question templates with no network and no model, and a remote
chat-completion service can be dropped in through configuration. Prompts carry
entity ids only; no quantity, cost, or capacity from the dataset ever crosses
the backend boundary.
"""

from __future__ import annotations

import json
import re
import secrets
import time
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Callable, Protocol

import httpx

from . import dsl
from .insights import PlanHistory, QueryError, QueryResult, QueryState, run_query
from .model import DemandPlan, SupplyNetwork
from .solver import FulfillmentPlan, PlanDiff, diff_plans, solve


class TranslationFailedError(Exception):
    """Backend output failed to parse/validate even after the retry."""

    def __init__(self, question: str, errors: list[str]) -> None:
        self.question = question
        self.errors = errors
        super().__init__(f"could not translate {question!r}: {'; '.join(errors)}")


class BackendUnavailableError(Exception):
    """Remote backend unreachable, timed out, or returned a non-success status."""


class AmbiguousQuestionError(Exception):
    """The question admits several plausible intents; carry them for clarification."""

    def __init__(self, question: str, options: tuple[str, ...]) -> None:
        self.question = question
        self.options = options
        super().__init__(f"ambiguous question: {question!r}")


@dataclass(frozen=True)
class ExampleEntry:
    question: str
    dsl: str
    tags: tuple[str, ...] = ()


def load_example_bank(path: str | Path) -> tuple[ExampleEntry, ...]:
    """One JSON record per line: question, dsl, tags."""
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        entries.append(ExampleEntry(
            question=doc["question"], dsl=doc["dsl"], tags=tuple(doc.get("tags", ()))))
    return tuple(entries)


class TranslatorBackend(Protocol):
    id: str

    def complete(self, prompt: str) -> str: ...


# ---------------------------------------------------------------------------
# Example selection and prompt assembly

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _token_set(text: str) -> frozenset[str]:
    return frozenset(_TOKEN_RE.findall(text.lower()))


def select_examples(question: str, bank: tuple[ExampleEntry, ...] | list[ExampleEntry],
                    k: int) -> list[ExampleEntry]:
    """Top-k bank entries by token-set Jaccard similarity; ties keep bank order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not bank:
        raise ValueError("example bank is empty")
    q_tokens = _token_set(question)
    scored: list[tuple[float, int]] = []
    for i, entry in enumerate(bank):
        e_tokens = _token_set(entry.question)
        union = q_tokens | e_tokens
        score = len(q_tokens & e_tokens) / len(union) if union else 0.0
        scored.append((-score, i))
    scored.sort()
    return [bank[i] for _, i in scored[:k]]


@dataclass(frozen=True)
class SchemaContext:
    """Entity ids and structure only; never carries dataset numbers."""

    materials: tuple[str, ...]
    products: tuple[str, ...]
    suppliers: tuple[str, ...]
    factories: tuple[str, ...]
    retailers: tuple[str, ...]
    regions: tuple[str, ...]
    lanes: tuple[tuple[str, str, str], ...]  # (lane id, origin, destination)
    records: tuple[str, ...]
    attribute_keys: tuple[str, ...]


def build_schema_context(network: SupplyNetwork, demand: DemandPlan) -> SchemaContext:
    return SchemaContext(
        materials=tuple(network.materials),
        products=tuple(network.products),
        suppliers=tuple(network.suppliers),
        factories=tuple(network.factories),
        retailers=tuple(network.retailers),
        regions=tuple(sorted({r.region for r in network.retailers.values()})),
        lanes=tuple((l.id, l.origin, l.destination) for l in network.lanes.values()),
        records=tuple(r.id for r in demand.records),
        attribute_keys=tuple(sorted({k for r in demand.records for k in r.attributes})),
    )


PROMPT_PREAMBLE = """\
You translate supply-chain planner questions into scenario script statements.
Reply with script text only. Statement shapes:
  SCALE DEMAND <selector> BY <factor>
  SET DEMAND <record> TO <quantity>
  SET CAPACITY FACTORY|SUPPLIER|LANE <id> TO <value>
  SET LEADTIME <lane> TO <days>
  DISABLE|ENABLE FACTORY|SUPPLIER|LANE <id>
  RESTRICT RETAILER <id> TO [<factory>, ...]
  ADJUST PRICE MATERIAL <id> [AT <supplier>] BY|TO|TIMES <amount>
  ADJUST SHIP COST LANE <id>|REGION <name> BY|TO|TIMES <amount>
  SHIFT DUE DATE <selector> BY <days>
  ADD LANE <origin> -> <destination> COST <c> CAPACITY <c> LEADTIME <d>
  QUERY INVENTORY SUPPLIER <id> MATERIAL <id>
  QUERY CHEAPEST LANE <origin> -> <destination>
  QUERY SHIPMENTS PRODUCT <id> TO RETAILER <id>
  QUERY TOP FACTORY LAST <n> DAYS
  QUERY FRACTION PLANS WHERE <metric> <cmp> <threshold> LAST <n> DAYS
Selectors: ALL | RETAILER <id> | PRODUCT <id> | RECORD <id> | ATTR <key>=<value> | REGION <name>
"""

QUESTION_MARKER = "Question:"
SCRIPT_MARKER = "Script:"
SCHEMA_MARKER = "Known ids:"


def render_schema_context(ctx: SchemaContext) -> str:
    lane_bits = ", ".join(f"{lid} ({o} -> {d})" for lid, o, d in ctx.lanes)
    lines = [
        SCHEMA_MARKER,
        f"  materials: {', '.join(ctx.materials)}",
        f"  products: {', '.join(ctx.products)}",
        f"  suppliers: {', '.join(ctx.suppliers)}",
        f"  factories: {', '.join(ctx.factories)}",
        f"  retailers: {', '.join(ctx.retailers)}",
        f"  regions: {', '.join(ctx.regions)}",
        f"  lanes: {lane_bits}",
        f"  records: {', '.join(ctx.records)}",
        f"  attribute keys: {', '.join(ctx.attribute_keys)}",
    ]
    return "\n".join(lines)


def build_prompt(question: str, examples: list[ExampleEntry], ctx: SchemaContext) -> str:
    parts = [PROMPT_PREAMBLE, "Examples:"]
    for e in examples:
        parts.append(f"{QUESTION_MARKER} {e.question}")
        parts.append(f"{SCRIPT_MARKER} {e.dsl}")
    parts.append(render_schema_context(ctx))
    parts.append(f"{QUESTION_MARKER} {question}")
    parts.append(SCRIPT_MARKER)
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# Offline deterministic translator

_UNSUPPORTED = "UNSUPPORTED QUESTION"


def _parse_prompt(prompt: str) -> tuple[str, SchemaContext | None]:
    """Recover the trailing question and the id section from an assembled prompt."""
    question = prompt
    idx = prompt.rfind(QUESTION_MARKER)
    if idx >= 0:
        tail = prompt[idx + len(QUESTION_MARKER):]
        question = tail.split("\n")[0].strip()
    ctx = None
    sidx = prompt.rfind(SCHEMA_MARKER)
    if sidx >= 0:
        fields: dict[str, str] = {}
        for line in prompt[sidx:].splitlines()[1:]:
            if not line.startswith("  ") or ":" not in line:
                break
            key, _, value = line.strip().partition(":")
            fields[key.strip()] = value.strip()

        def split_ids(key: str) -> tuple[str, ...]:
            raw = fields.get(key, "")
            return tuple(x.strip() for x in raw.split(",") if x.strip())

        lanes = []
        for part in re.findall(r"(\w+) \((\w+) -> (\w+)\)", fields.get("lanes", "")):
            lanes.append(part)
        ctx = SchemaContext(
            materials=split_ids("materials"), products=split_ids("products"),
            suppliers=split_ids("suppliers"), factories=split_ids("factories"),
            retailers=split_ids("retailers"), regions=split_ids("regions"),
            lanes=tuple(lanes), records=split_ids("records"),
            attribute_keys=split_ids("attribute keys"),
        )
    return question, ctx


def _decimal(text: str) -> Decimal:
    return Decimal(text.replace(",", ""))


def _fmt_decimal(value: Decimal) -> str:
    s = format(value.normalize(), "f")
    return s if s else "0"


def _pct_factor(pct_text: str, increase: bool) -> str:
    pct = _decimal(pct_text)
    factor = (Decimal(100) + pct) / 100 if increase else (Decimal(100) - pct) / 100
    return _fmt_decimal(factor)


def _find_known_id(question: str, candidates: tuple[str, ...]) -> str | None:
    for match in re.finditer(r"[A-Za-z_][A-Za-z0-9_]*", question):
        if match.group(0) in candidates:
            return match.group(0)
    return None


def _demand_selector(question: str, ctx: SchemaContext | None) -> str:
    if ctx is not None:
        m = re.search(r"\bretailer\s+(\w+)", question, re.I)
        if m and m.group(1) in ctx.retailers:
            return f"RETAILER {m.group(1)}"
        m = re.search(r"\bbusiness\s+group\s+(\w+)", question, re.I)
        if m:
            return f"ATTR business_group={m.group(1)}"
        m = re.search(r"\bregion\s+(\w+)", question, re.I)
        if m and m.group(1) in ctx.regions:
            return f"REGION {m.group(1)}"
        m = re.search(r"\bproduct\s+(\w+)", question, re.I)
        if m and m.group(1) in ctx.products:
            return f"PRODUCT {m.group(1)}"
        m = re.search(r"\b(?:record|demand)\s+(\w+)", question, re.I)
        if m and m.group(1) in ctx.records:
            return f"RECORD {m.group(1)}"
    return "ALL"


_NODE_KIND = {"factory": "FACTORY", "plant": "FACTORY", "supplier": "SUPPLIER",
              "warehouse": "SUPPLIER", "lane": "LANE"}

_PERIOD_WORDS = {"week": 7, "month": 30}


def _period_days(text: str) -> str | None:
    m = re.search(r"\b(?:last|past)\s+(week|month|(\d+)\s+days?)\b", text, re.I)
    if not m:
        return None
    if m.group(2):
        return f"LAST {int(m.group(2))} DAYS"
    return f"LAST {_PERIOD_WORDS[m.group(1).lower()]} DAYS"


@dataclass(frozen=True)
class _Rule:
    description: str
    handler: Callable[[str, SchemaContext | None], str | None]


def _rule_ambiguous(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(r"\b(?:utili[sz]e|use)\s+(?:factory|plant|supplier)?\s*(\w+)\s+better\b"
                  r"|\bbetter\s+utili[sz]ation\b", q, re.I)
    if not m:
        return None
    subject = m.group(1) if m.group(1) else "it"
    # "better" is underdetermined: offer refinements that the templates do support
    raise AmbiguousQuestionError(q, (
        f"Can we still fulfill all demand if we shut down factory {subject}?",
        "Which was the most productive factory last week?",
    ))


def _rule_scale(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(
        r"\bdemand\b[^?]*?\b(increase[sd]?|grow[sn]?|rise[sn]?|goes\s+up|"
        r"decrease[sd]?|drop[sd]?|shrink[sn]?|goes\s+down|fall[sn]?)\s+by\s+"
        r"([\d.]+)\s*(?:%|percent)", q, re.I)
    if not m:
        return None
    verb = m.group(1).lower()
    increase = not any(w in verb for w in ("decrease", "drop", "shrink", "down", "fall"))
    try:
        factor = _pct_factor(m.group(2), increase)
    except InvalidOperation:
        return None
    return f"SCALE DEMAND {_demand_selector(q, ctx)} BY {factor}"


def _rule_dock_shift(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(
        r"\b(?:dock|move|pull|push)\b[^?]*?\b(a\s+week|two\s+weeks|(\d+)\s+days?)\s+"
        r"(earlier|later|sooner)", q, re.I)
    if not m:
        return None
    if m.group(2):
        days = int(m.group(2))
    else:
        days = 7 if m.group(1).lower().startswith("a") else 14
    if m.group(3).lower() in ("earlier", "sooner"):
        days = -days
    record = _find_known_id(q, ctx.records) if ctx else None
    if record is None:
        rm = re.search(r"\bdemand\s+(\w+)", q, re.I)
        record = rm.group(1) if rm else None
    if record is None:
        return None
    return f"SHIFT DUE DATE RECORD {record} BY {days}"


def _rule_disable(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(
        r"\b(?:shut(?:ting)?\s*(?:down)?|close[sd]?|deactivate[sd]?|disable[sd]?|"
        r"turn(?:ing)?\s+off)\b[^?]*?\b(factory|plant|supplier|warehouse|lane)\s+(\w+)",
        q, re.I)
    if m is None:
        m = re.search(
            r"\b(factory|plant|supplier|warehouse|lane)\s+(\w+)\s+"
            r"(?:is|goes|went|stays)\s+(?:down|offline|dark|out)\b", q, re.I)
    if m is None:
        return None
    return f"DISABLE {_NODE_KIND[m.group(1).lower()]} {m.group(2)}"


def _rule_enable(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(
        r"\b(?:re-?open|re-?enable|reactivate|bring\s+back|restore)\b[^?]*?"
        r"\b(factory|plant|supplier|warehouse|lane)\s+(\w+)", q, re.I)
    if not m:
        return None
    return f"ENABLE {_NODE_KIND[m.group(1).lower()]} {m.group(2)}"


def _rule_restrict(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(
        r"\bretailer\s+(\w+)\b[^?]*?\bonly\s+from\s+factor(?:y|ies)\s+([\w,\s]+?)(?:\?|\.|$)",
        q, re.I)
    if not m:
        return None
    retailer = m.group(1)
    raw = re.split(r",|\band\b", m.group(2))
    factories = [part.strip() for part in raw if part.strip()]
    if not factories:
        return None
    return f"RESTRICT RETAILER {retailer} TO [{', '.join(factories)}]"


def _rule_price_cheaper(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(
        r"\bmaterial\s+(?:of\s+type\s+)?(\w+)(?:\s+(?:at|from)\s+(?:supplier\s+)?(\w+))?"
        r"\s+(?:is|were|was|becomes?|got)\s+\$?([\d.]+|one)\s*(?:dollars?\s+)?"
        r"(cheaper|more\s+expensive)", q, re.I)
    if not m:
        return None
    amount = "1" if m.group(3).lower() == "one" else _fmt_decimal(_decimal(m.group(3)))
    sign = "-" if m.group(4).lower() == "cheaper" else ""
    at = f" AT {m.group(2)}" if m.group(2) else ""
    return f"ADJUST PRICE MATERIAL {m.group(1)}{at} BY {sign}{amount}"


def _rule_price_change(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(
        r"\bprice\s+of\s+material\s+(\w+)(?:\s+at\s+(?:supplier\s+)?(\w+))?\s+"
        r"(increase[sd]?|rise[sn]?|goes\s+up|decrease[sd]?|drop[sd]?|fall[sn]?)\s+by\s+"
        r"\$?([\d.]+)", q, re.I)
    if not m:
        return None
    down = any(w in m.group(3).lower() for w in ("decrease", "drop", "fall"))
    at = f" AT {m.group(2)}" if m.group(2) else ""
    amount = _fmt_decimal(_decimal(m.group(4)))
    return f"ADJUST PRICE MATERIAL {m.group(1)}{at} BY {'-' if down else ''}{amount}"


def _rule_tariff(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(
        r"\btariff\s+of\s+([\d.]+)\s*(?:%|percent)\s+(?:on|applies\s+to)\s+"
        r"(?:all\s+)?shipments?\s+(?:to|into)\s+(?:region\s+)?(\w+)", q, re.I)
    if not m:
        return None
    factor = _pct_factor(m.group(1), increase=True)
    return f"ADJUST SHIP COST REGION {m.group(2)} TIMES {factor}"


def _rule_ship_cost(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(
        r"\bshipping\s+cost\s+(?:on|of)\s+lane\s+(\w+)\s+"
        r"(increase[sd]?|decrease[sd]?|rise[sn]?|drop[sd]?)\s+by\s+\$?([\d.]+)", q, re.I)
    if not m:
        return None
    down = any(w in m.group(2).lower() for w in ("decrease", "drop"))
    amount = _fmt_decimal(_decimal(m.group(3)))
    return f"ADJUST SHIP COST LANE {m.group(1)} BY {'-' if down else ''}{amount}"


def _rule_capacity(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(
        r"\bcapacity\s+of\s+(factory|plant|supplier|lane)\s+(\w+)\s+"
        r"(?:is\s+)?(?:set\s+to|drops?\s+to|changes?\s+to|becomes?|falls?\s+to)\s+([\d.]+)",
        q, re.I)
    if m is None:
        m = re.search(
            r"\b(factory|plant|supplier|lane)\s+(\w+)(?:'s)?\s+capacity\s+"
            r"(?:is\s+)?(?:set\s+to|drops?\s+to|becomes?|falls?\s+to)\s+([\d.]+)", q, re.I)
    if m is None:
        return None
    kind = _NODE_KIND[m.group(1).lower()]
    value = _fmt_decimal(_decimal(m.group(3)))
    return f"SET CAPACITY {kind} {m.group(2)} TO {value}"


def _rule_leadtime(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(
        r"\blead\s*time\s+(?:of|on)\s+lane\s+(\w+)\s+"
        r"(?:is\s+set\s+to|rises?\s+to|increases?\s+to|becomes?|is\s+now)\s+([\d.]+)", q, re.I)
    if not m:
        return None
    return f"SET LEADTIME {m.group(1)} TO {_fmt_decimal(_decimal(m.group(2)))}"


def _rule_add_lane(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(
        r"\badd(?:ing|ed)?\s+a?\s*(?:new\s+)?(?:transit\s+)?lane\s+from\s+(\w+)\s+to\s+(\w+)"
        r"[^?]*?\bcost\s+\$?([\d.]+)[^?]*?\bcapacity\s+([\d.]+)[^?]*?\blead\s*time\s+(?:of\s+)?([\d.]+)",
        q, re.I)
    if not m:
        return None
    return (f"ADD LANE {m.group(1)} -> {m.group(2)} COST {_fmt_decimal(_decimal(m.group(3)))} "
            f"CAPACITY {_fmt_decimal(_decimal(m.group(4)))} "
            f"LEADTIME {_fmt_decimal(_decimal(m.group(5)))}")


def _rule_set_demand(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(r"\bdemand\s+(\w+)\s+(?:is\s+set\s+|is\s+changed\s+)?to\s+([\d.]+)\s+units",
                  q, re.I)
    if not m:
        return None
    if ctx is not None and m.group(1) not in ctx.records:
        return None
    return f"SET DEMAND {m.group(1)} TO {_fmt_decimal(_decimal(m.group(2)))}"


def _rule_query_inventory(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(
        r"\bhow\s+much\s+(?:raw\s+)?material\s+(?:of\s+type\s+)?(\w+)\s+does\s+"
        r"supplier\s+(\w+)\s+have", q, re.I)
    if not m:
        return None
    return f"QUERY INVENTORY SUPPLIER {m.group(2)} MATERIAL {m.group(1)}"


def _rule_query_cheapest(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(
        r"\bcheapest\s+shipping\s+(?:option|lane|route)\s+from\s+(?:factory\s+)?(\w+)\s+"
        r"to\s+(?:retailer\s+)?(\w+)", q, re.I)
    if not m:
        return None
    return f"QUERY CHEAPEST LANE {m.group(1)} -> {m.group(2)}"


def _rule_query_shipments(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(
        r"\bhow\s+many\s+(?:products?\s+)?(?:of\s+type\s+)?(\w+)\s+(?:are\s+)?(?:being\s+)?"
        r"shipped\s+(?:today\s+)?to\s+(?:retailer\s+)?(\w+)", q, re.I)
    if not m:
        return None
    return f"QUERY SHIPMENTS PRODUCT {m.group(1)} TO RETAILER {m.group(2)}"


def _rule_query_top_factory(q: str, ctx: SchemaContext | None) -> str | None:
    if not re.search(r"\bmost\s+productive\s+factory\b", q, re.I):
        return None
    period = _period_days(q)
    if period is None:
        return None
    return f"QUERY TOP FACTORY {period}"


_FRACTION_METRICS = {
    "total shipping": "shipping", "shipping": "shipping",
    "outbound shipping": "outbound_shipping", "inbound shipping": "inbound_shipping",
    "delay": "delay", "production": "production", "material": "material",
    "lost": "lost_penalty", "total": "total_cost",
}


def _rule_query_fraction(q: str, ctx: SchemaContext | None) -> str | None:
    m = re.search(
        r"\bfraction\s+of\s+(?:instances|plans|days)\s+where\s+the\s+"
        r"([a-z ]+?)\s+cost\s+(exceeded|was\s+above|stayed\s+below|was\s+below)\s+"
        r"\$?([\d,.]+)\s*(?:dollars)?", q, re.I)
    if not m:
        return None
    metric = _FRACTION_METRICS.get(m.group(1).strip().lower())
    if metric is None:
        return None
    cmp_word = m.group(2).lower()
    comparator = ">" if ("exceed" in cmp_word or "above" in cmp_word) else "<"
    period = _period_days(q)
    if period is None:
        return None
    threshold = _fmt_decimal(_decimal(m.group(3)))
    return f"QUERY FRACTION PLANS WHERE {metric} {comparator} {threshold} {period}"


OFFLINE_RULES: tuple[_Rule, ...] = (
    _Rule("Clarify ambiguous utilization goals before acting", _rule_ambiguous),
    _Rule("Scale demand up or down by a percentage "
          "(overall, or for a retailer / product / region / business group / record)",
          _rule_scale),
    _Rule("Shift a demand record's dock date earlier or later", _rule_dock_shift),
    _Rule("Shut down or deactivate a factory, supplier, or lane", _rule_disable),
    _Rule("Reactivate a factory, supplier, or lane", _rule_enable),
    _Rule("Restrict a retailer to specific factories", _rule_restrict),
    _Rule("Change a material's unit price (optionally at one supplier)", _rule_price_cheaper),
    _Rule("Raise or lower a material price by an amount", _rule_price_change),
    _Rule("Apply a tariff to shipments into a region", _rule_tariff),
    _Rule("Raise or lower shipping cost on a lane", _rule_ship_cost),
    _Rule("Set the capacity of a factory, supplier, or lane", _rule_capacity),
    _Rule("Set the lead time of a lane", _rule_leadtime),
    _Rule("Add a new transit lane between two locations", _rule_add_lane),
    _Rule("Set a demand record's quantity to a value in units", _rule_set_demand),
    _Rule("Ask a supplier's on-hand inventory of a material", _rule_query_inventory),
    _Rule("Ask the cheapest shipping option between two locations", _rule_query_cheapest),
    _Rule("Ask how many units of a product ship to a retailer today", _rule_query_shipments),
    _Rule("Ask which factory was most productive over a period", _rule_query_top_factory),
    _Rule("Ask the fraction of plans where a cost exceeded a threshold", _rule_query_fraction),
)


def supported_question_catalog() -> list[str]:
    return [rule.description for rule in OFFLINE_RULES]


class OfflineTranslator:
    """Deterministic pattern-rule translator; the no-network stand-in for a model."""

    id = "offline"

    def complete(self, prompt: str) -> str:
        question, ctx = _parse_prompt(prompt)
        for rule in OFFLINE_RULES:
            try:
                out = rule.handler(question, ctx)
            except AmbiguousQuestionError:
                raise
            except (InvalidOperation, ValueError, OverflowError):
                continue  # a slot looked numeric but was not; the rule simply does not apply
            if out is not None:
                return out
        return _UNSUPPORTED


class RemoteBackend:
    """Chat-completion HTTP client; requests carry (role, content) messages at temperature 0."""

    def __init__(self, base_url: str, model: str, auth_token: str | None = None,
                 timeout_s: float = 30.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.auth_token = auth_token
        self.timeout_s = timeout_s
        self.id = f"remote:{model}"

    def complete(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        try:
            response = httpx.post(f"{self.base_url}/chat/completions", json=payload,
                                  headers=headers, timeout=self.timeout_s)
        except httpx.HTTPError as exc:
            raise BackendUnavailableError(f"backend request failed: {exc}") from exc
        if response.status_code // 100 != 2:
            raise BackendUnavailableError(
                f"backend returned status {response.status_code}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise BackendUnavailableError(f"malformed backend response: {exc}") from exc


class RecordingStubBackend:
    """Test backend: records every outbound prompt, replays scripted outputs."""

    def __init__(self, outputs: list[str] | None = None) -> None:
        self.prompts: list[str] = []
        self.outputs = list(outputs) if outputs else []
        self.id = "recording-stub"

    def complete(self, prompt: str) -> str:
        self.prompts.append(prompt)
        if self.outputs:
            return self.outputs.pop(0)
        return _UNSUPPORTED


# ---------------------------------------------------------------------------
# Translation with one retry

def translate(question: str, backend: TranslatorBackend,
              bank: tuple[ExampleEntry, ...] | list[ExampleEntry],
              network: SupplyNetwork, demand: DemandPlan, k: int = 5,
              ) -> tuple[dsl.ScenarioScript, dict[str, Any]]:
    """Assemble the prompt, call the backend, validate; retry once with the error appended."""
    ctx = build_schema_context(network, demand)
    examples = select_examples(question, bank, k) if bank else []
    prompt = build_prompt(question, examples, ctx)

    errors: list[str] = []
    out = backend.complete(prompt)
    for attempt in (0, 1):
        try:
            script = dsl.parse(out)
            dsl.check(script, network, demand)
            return script, {"backend": backend.id, "retries": attempt}
        except dsl.ScenarioError as exc:
            errors.append(str(exc))
            if attempt == 1:
                break
            retry_prompt = (f"{prompt}\nYour previous reply was invalid: {exc}\n"
                            f"Reply with a corrected script only.\n{SCRIPT_MARKER}")
            out = backend.complete(retry_prompt)
    raise TranslationFailedError(question, errors)


# ---------------------------------------------------------------------------
# Interpretation

_COMPONENT_LABELS = {
    "material": "material cost",
    "inbound_shipping": "inbound shipping",
    "production": "production cost",
    "outbound_shipping": "outbound shipping",
    "delay": "delay cost",
    "lost_penalty": "lost-demand penalty",
}

_NUMBER_TOKEN_RE = re.compile(r"(?<![\w.])-?\d+(?:\.\d+)?%?")


def _qty(value: float) -> str:
    return f"{value:g}"


def interpret_diff(diff: PlanDiff, apply_log: dsl.ApplyLog | None = None) -> str:
    sentences: list[str] = []
    if abs(diff.delta_total) <= 1e-9 and not diff.changed_flows and not diff.delta_lost:
        return "The plan is unchanged."
    if diff.delta_total > 1e-9:
        sentences.append(
            f"Total cost increases by {diff.delta_total:.2f} "
            f"(from {diff.base_total:.2f} to {diff.alt_total:.2f}).")
    elif diff.delta_total < -1e-9:
        sentences.append(
            f"Total cost decreases by {-diff.delta_total:.2f} "
            f"(from {diff.base_total:.2f} to {diff.alt_total:.2f}).")
    else:
        sentences.append("Total cost is unchanged, but the routing shifts.")

    dominant = max(diff.delta_by_component, key=lambda k: abs(diff.delta_by_component[k]))
    if abs(diff.delta_by_component[dominant]) > 1e-9:
        delta = diff.delta_by_component[dominant]
        direction = "up" if delta > 0 else "down"
        sentences.append(
            f"The largest change is {_COMPONENT_LABELS[dominant]}, {direction} "
            f"{abs(delta):.2f}.")

    for record, delta in sorted(diff.delta_lost.items()):
        if delta > 0:
            sentences.append(f"{_qty(delta)} units of demand {record} are lost.")
        else:
            sentences.append(f"{_qty(-delta)} units of demand {record} are recovered.")

    if diff.feasibility_note:
        sentences.append(diff.feasibility_note)
    return " ".join(sentences)


def interpret_query(result: QueryResult) -> str:
    d = result.details
    if result.form == "supplier_inventory":
        return (f"Supplier {d['supplier']} has {_qty(result.value)} units of material "
                f"{d['material']} on hand.")
    if result.form == "cheapest_lane":
        return (f"The cheapest shipping option from {d['origin']} to {d['destination']} is "
                f"lane {d['lane']} at {_qty(result.value)} per unit "
                f"(lead time {_qty(d['lead_time'])} days).")
    if result.form == "shipment_quantity":
        return (f"{_qty(result.value)} units of product {d['product']} are being shipped to "
                f"retailer {d['retailer']} in the current plan.")
    if result.form == "top_factory":
        return (f"The most productive factory in the period is {result.value} with "
                f"{_qty(d['units'])} units produced.")
    if result.form == "fraction_plans":
        return (f"{_qty(result.value * 100)}% of plans in the period had "
                f"{d['metric'].replace('_', ' ')} {d['comparator']} {_qty(d['threshold'])} "
                f"({d['matching']} of {d['total']}).")
    return f"Result: {result.value}"


def paraphrase(text: str, backend: TranslatorBackend) -> str:
    """Optional wording pass. Numbers are pulled out first and substituted back after,
    so the backend can never alter them."""
    numbers = _NUMBER_TOKEN_RE.findall(text)
    shielded = text
    for i, num in enumerate(numbers):
        shielded = shielded.replace(num, f"{{n{i}}}", 1)
    prompt = ("Rephrase the following planner-facing sentence in plain professional "
              "language. Keep every {n#} placeholder exactly as written.\n" + shielded)
    try:
        reply = backend.complete(prompt)
    except Exception:
        return text
    if any(f"{{n{i}}}" not in reply for i in range(len(numbers))):
        return text
    for i, num in enumerate(numbers):
        reply = reply.replace(f"{{n{i}}}", num)
    return reply


def interpret(structured: PlanDiff | QueryResult, apply_log: dsl.ApplyLog | None = None,
              paraphrase_backend: TranslatorBackend | None = None) -> str:
    if isinstance(structured, PlanDiff):
        text = interpret_diff(structured, apply_log)
    elif isinstance(structured, QueryResult):
        text = interpret_query(structured)
    else:
        raise TypeError(f"cannot interpret {type(structured).__name__}")
    if paraphrase_backend is not None:
        text = paraphrase(text, paraphrase_backend)
    return text


# ---------------------------------------------------------------------------
# Answers and session orchestration

@dataclass(frozen=True)
class Answer:
    kind: str  # "insight" | "what-if" | "clarification" | "fallback"
    text: str
    dsl: str | None = None
    structured: PlanDiff | QueryResult | None = None
    options: tuple[str, ...] = ()
    provenance: dict[str, Any] = field(default_factory=dict)


def fallback_text(reason: str | None = None) -> str:
    lines = []
    if reason:
        lines.append(reason)
    lines.append("I could not turn that question into a scenario. "
                 "Questions I can answer:")
    lines.extend(f"- {entry}" for entry in supported_question_catalog())
    return "\n".join(lines)


@dataclass
class PlannerSession:
    network: SupplyNetwork
    demand: DemandPlan
    baseline: FulfillmentPlan
    backend: TranslatorBackend
    bank: tuple[ExampleEntry, ...]
    k: int = 5
    history: PlanHistory | None = None
    paraphrase_enabled: bool = False
    session_id: str = ""
    log_path: str | Path | None = None

    def __post_init__(self) -> None:
        if not self.session_id:
            self.session_id = secrets.token_hex(16)


def open_session(network: SupplyNetwork, demand: DemandPlan, backend: TranslatorBackend,
                 bank: tuple[ExampleEntry, ...], **kwargs: Any) -> PlannerSession:
    baseline = solve(network, demand)
    return PlannerSession(network=network, demand=demand, baseline=baseline,
                          backend=backend, bank=bank, **kwargs)


def _log_interaction(session: PlannerSession, question: str, dsl_text: str | None,
                     kind: str, latency_s: float) -> None:
    if session.log_path is None:
        return
    record = {
        "ts": time.time(),
        "session": session.session_id,
        "question": question,
        "dsl": dsl_text,
        "kind": kind,
        "latency_s": latency_s,
    }
    with open(session.log_path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record) + "\n")


def answer(session: PlannerSession, question: str) -> Answer:
    """Full orchestration; always returns a well-formed Answer and never mutates the session."""
    started = time.monotonic()
    question = (question or "").strip()
    para = session.backend if session.paraphrase_enabled else None

    def done(result: Answer) -> Answer:
        _log_interaction(session, question, result.dsl, result.kind,
                         time.monotonic() - started)
        return result

    if not question:
        return done(Answer(kind="fallback", text=fallback_text("The question was empty."),
                           provenance={"backend": session.backend.id}))

    try:
        script, provenance = translate(question, session.backend, session.bank,
                                       session.network, session.demand, k=session.k)
    except AmbiguousQuestionError as exc:
        options = "\n".join(f"{i + 1}. {opt}" for i, opt in enumerate(exc.options))
        return done(Answer(
            kind="clarification",
            text=f"That question can be read several ways. Did you mean:\n{options}",
            options=exc.options,
            provenance={"backend": session.backend.id},
        ))
    except TranslationFailedError as exc:
        return done(Answer(
            kind="fallback", text=fallback_text(),
            provenance={"backend": session.backend.id, "errors": exc.errors},
        ))

    canonical = dsl.render(script)

    if script.is_query_only():
        state = QueryState(network=session.network, demand=session.demand,
                           plan=session.baseline, history=session.history)
        try:
            result = run_query(script.statements[0].form, state)
        except QueryError as exc:
            return done(Answer(
                kind="fallback", text=fallback_text(f"That query failed: {exc}."),
                dsl=canonical, provenance=provenance,
            ))
        return done(Answer(
            kind="insight", text=interpret(result, paraphrase_backend=para),
            dsl=canonical, structured=result, provenance=provenance,
        ))

    try:
        alt_network, alt_demand, apply_log = dsl.apply(script, session.network, session.demand)
        alt_plan = solve(alt_network, alt_demand)
    except dsl.ScenarioError as exc:
        return done(Answer(
            kind="fallback", text=fallback_text(f"The scenario could not be applied: {exc}."),
            dsl=canonical, provenance=provenance,
        ))
    diff = diff_plans(session.baseline, alt_plan)
    return done(Answer(
        kind="what-if", text=interpret(diff, apply_log, paraphrase_backend=para),
        dsl=canonical, structured=diff, provenance=provenance,
    ))


def answer_to_dict(result: Answer) -> dict[str, Any]:
    from .solver import diff_to_dict  # local import avoids a cycle at module load

    structured: dict[str, Any] | None = None
    if isinstance(result.structured, PlanDiff):
        structured = {"type": "plan_diff", **diff_to_dict(result.structured)}
    elif isinstance(result.structured, QueryResult):
        structured = {
            "type": "query_result", "form": result.structured.form,
            "value": result.structured.value, "unit": result.structured.unit,
            "details": dict(result.structured.details),
        }
    return {
        "kind": result.kind,
        "text": result.text,
        "dsl": result.dsl,
        "structured": structured,
        "options": list(result.options),
        "provenance": dict(result.provenance),
    }


__all__ = [
    "TranslationFailedError", "BackendUnavailableError", "AmbiguousQuestionError",
    "ExampleEntry", "load_example_bank", "TranslatorBackend",
    "select_examples", "SchemaContext", "build_schema_context", "build_prompt",
    "PROMPT_PREAMBLE", "QUESTION_MARKER", "SCRIPT_MARKER", "SCHEMA_MARKER",
    "OFFLINE_RULES", "supported_question_catalog",
    "OfflineTranslator", "RemoteBackend", "RecordingStubBackend",
    "translate", "interpret", "interpret_diff", "interpret_query", "paraphrase",
    "Answer", "fallback_text", "PlannerSession", "open_session", "answer",
    "answer_to_dict",
]
