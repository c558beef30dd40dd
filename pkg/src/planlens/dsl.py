"""Scenario-edit DSL: the constrained language scenario scripts are written in.

Statements can only touch whitelisted model fields (prices, costs, capacities,
lead times, due dates, quantities, active flags, lane additions) plus read-only
queries, so a translated script can never read or write anything outside the
dataset handed to apply().
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Any, Union

from .insights import (
    CheapestLane,
    FractionPlansWhere,
    Period,
    QUERY_METRICS,
    ShipmentQuantity,
    SupplierInventory,
    TopFactoryByOutput,
)
from .model import DemandPlan, DemandRecord, Lane, SupplyNetwork


class ScenarioError(Exception):
    """Base class for scenario parsing/validation/application failures."""


class ScenarioParseError(ScenarioError):
    def __init__(self, message: str, line: int, column: int,
                 expected: tuple[str, ...] = ()) -> None:
        self.line = line
        self.column = column
        self.expected = expected
        hint = f" (expected one of: {', '.join(expected)})" if expected else ""
        super().__init__(f"line {line}, column {column}: {message}{hint}")


class UnknownKeywordError(ScenarioParseError):
    """Statement starts with a word that is not in the language."""


class UnresolvedReferenceError(ScenarioError):
    def __init__(self, name: str, kind: str = "entity") -> None:
        self.name = name
        super().__init__(f"unresolved {kind} reference: {name}")


class IllegalValueError(ScenarioError):
    pass


class QueryNotApplicableError(ScenarioError):
    """Query statements are executed by the insights engine, not applied as edits."""


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Selector:
    kind: str  # all | retailer | product | record | attr | region
    value: str = ""
    key: str = ""


@dataclass(frozen=True)
class ScaleDemand:
    selector: Selector
    factor: float


@dataclass(frozen=True)
class SetDemand:
    record: str
    quantity: float


@dataclass(frozen=True)
class SetCapacity:
    kind: str  # factory | supplier | lane
    ref: str
    value: float


@dataclass(frozen=True)
class SetLeadTime:
    lane: str
    days: float


@dataclass(frozen=True)
class Disable:
    kind: str  # factory | supplier | lane
    ref: str


@dataclass(frozen=True)
class Enable:
    kind: str
    ref: str


@dataclass(frozen=True)
class RestrictRetailer:
    retailer: str
    allowed: tuple[str, ...]


@dataclass(frozen=True)
class AdjustPrice:
    material: str
    supplier: str | None
    mode: str  # by | to | times
    amount: float


@dataclass(frozen=True)
class AdjustShipCost:
    target_kind: str  # lane | region
    target: str
    mode: str
    amount: float


@dataclass(frozen=True)
class ShiftDueDate:
    selector: Selector
    days: int


@dataclass(frozen=True)
class AddLane:
    origin: str
    destination: str
    cost: float
    capacity: float
    lead_time: float


@dataclass(frozen=True)
class Query:
    form: Any  # one of the insights QueryForm types


Statement = Union[ScaleDemand, SetDemand, SetCapacity, SetLeadTime, Disable, Enable,
                  RestrictRetailer, AdjustPrice, AdjustShipCost, ShiftDueDate,
                  AddLane, Query]


@dataclass(frozen=True)
class ScenarioScript:
    statements: tuple[Statement, ...]

    def is_query_only(self) -> bool:
        return all(isinstance(s, Query) for s in self.statements)

    def has_queries(self) -> bool:
        return any(isinstance(s, Query) for s in self.statements)


@dataclass(frozen=True)
class ApplyEntry:
    statement: str
    touched: tuple[str, ...]
    prior: dict[str, Any] = field(default_factory=dict)


ApplyLog = tuple[ApplyEntry, ...]


# ---------------------------------------------------------------------------
# Tokenizer

_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)")

STATEMENT_KEYWORDS = ("SCALE", "SET", "DISABLE", "ENABLE", "RESTRICT", "ADJUST",
                      "SHIFT", "ADD", "QUERY")


@dataclass(frozen=True)
class _Token:
    kind: str  # WORD NUMBER STRING PUNCT END
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line = 1
    col = 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            tokens.append(_Token("PUNCT", ";", line, col))
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == '"':
            end = text.find('"', i + 1)
            if end == -1:
                raise ScenarioParseError("unterminated string", line, col)
            tokens.append(_Token("STRING", text[i + 1:end], line, col))
            col += end - i + 1
            i = end + 1
            continue
        if ch == "-" and i + 1 < n and text[i + 1] == ">":
            tokens.append(_Token("PUNCT", "->", line, col))
            i += 2
            col += 2
            continue
        if ch in "<>" :
            op = ch
            if i + 1 < n and text[i + 1] == "=":
                op += "="
                i += 1
            tokens.append(_Token("PUNCT", op, line, col))
            i += 1
            col += len(op)
            continue
        if ch in ";,[]=":
            tokens.append(_Token("PUNCT", ch, line, col))
            i += 1
            col += 1
            continue
        m = _NUMBER_RE.match(text, i)
        if m and (ch.isdigit() or ch == "." or
                  (ch in "+-" and i + 1 < n and (text[i + 1].isdigit() or text[i + 1] == "."))):
            tokens.append(_Token("NUMBER", m.group(0), line, col))
            col += m.end() - i
            i = m.end()
            continue
        m = _WORD_RE.match(text, i)
        if m:
            tokens.append(_Token("WORD", m.group(0), line, col))
            col += m.end() - i
            i = m.end()
            continue
        raise ScenarioParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("END", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser

class _Parser:
    def __init__(self, tokens: list[_Token]) -> None:
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "END":
            self.pos += 1
        return tok

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "WORD" and tok.text.upper() in words

    def take_keyword(self, *words: str) -> str:
        tok = self.peek()
        if tok.kind == "WORD" and tok.text.upper() in words:
            self.next()
            return tok.text.upper()
        raise ScenarioParseError(
            f"unexpected {tok.kind.lower()} {tok.text!r}", tok.line, tok.column, expected=words)

    def take_identifier(self, what: str = "identifier") -> str:
        tok = self.peek()
        if tok.kind == "WORD":
            self.next()
            return tok.text
        raise ScenarioParseError(
            f"expected {what}, got {tok.text!r}", tok.line, tok.column, expected=(what,))

    def take_name(self) -> str:
        tok = self.peek()
        if tok.kind in ("WORD", "STRING"):
            self.next()
            return tok.text
        raise ScenarioParseError(
            f"expected name, got {tok.text!r}", tok.line, tok.column, expected=("name",))

    def take_number(self) -> float:
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.next()
            return float(tok.text)
        raise ScenarioParseError(
            f"expected number, got {tok.text!r}", tok.line, tok.column, expected=("number",))

    def take_int(self, what: str = "whole number") -> int:
        tok = self.peek()
        value = self.take_number()
        if not float(value).is_integer():
            raise ScenarioParseError(f"expected {what}, got {value}", tok.line, tok.column)
        return int(value)

    def take_punct(self, text: str) -> None:
        tok = self.peek()
        if tok.kind == "PUNCT" and tok.text == text:
            self.next()
            return
        raise ScenarioParseError(
            f"expected {text!r}, got {tok.text!r}", tok.line, tok.column, expected=(text,))

    def parse_script(self) -> ScenarioScript:
        statements: list[Statement] = []
        while True:
            while self.peek().kind == "PUNCT" and self.peek().text == ";":
                self.next()
            if self.peek().kind == "END":
                break
            statements.append(self.parse_statement())
            tok = self.peek()
            if tok.kind == "END":
                break
            if tok.kind == "PUNCT" and tok.text == ";":
                continue
            raise ScenarioParseError(
                f"expected end of statement, got {tok.text!r}", tok.line, tok.column,
                expected=(";",))
        if not statements:
            tok = self.peek()
            raise ScenarioParseError("empty script", tok.line, tok.column,
                                     expected=STATEMENT_KEYWORDS)
        return ScenarioScript(statements=tuple(statements))

    def parse_statement(self) -> Statement:
        tok = self.peek()
        if tok.kind != "WORD":
            raise ScenarioParseError(
                f"expected a statement, got {tok.text!r}", tok.line, tok.column,
                expected=STATEMENT_KEYWORDS)
        keyword = tok.text.upper()
        if keyword not in STATEMENT_KEYWORDS:
            raise UnknownKeywordError(
                f"unknown keyword {tok.text!r}", tok.line, tok.column,
                expected=STATEMENT_KEYWORDS)
        self.next()
        return getattr(self, f"_parse_{keyword.lower()}")()

    def parse_selector(self) -> Selector:
        kind = self.take_keyword("ALL", "RETAILER", "PRODUCT", "RECORD", "ATTR", "REGION")
        if kind == "ALL":
            return Selector("all")
        if kind == "ATTR":
            key = self.take_identifier("attribute key")
            self.take_punct("=")
            value = self.take_name()
            return Selector("attr", value=value, key=key)
        if kind == "REGION":
            return Selector("region", value=self.take_name())
        return Selector(kind.lower(), value=self.take_identifier(f"{kind.lower()} id"))

    def _parse_scale(self) -> Statement:
        self.take_keyword("DEMAND")
        selector = self.parse_selector()
        self.take_keyword("BY")
        return ScaleDemand(selector=selector, factor=self.take_number())

    def _parse_set(self) -> Statement:
        what = self.take_keyword("DEMAND", "CAPACITY", "LEADTIME")
        if what == "DEMAND":
            record = self.take_identifier("record id")
            self.take_keyword("TO")
            return SetDemand(record=record, quantity=self.take_number())
        if what == "CAPACITY":
            kind = self.take_keyword("FACTORY", "SUPPLIER", "LANE").lower()
            ref = self.take_identifier(f"{kind} id")
            self.take_keyword("TO")
            return SetCapacity(kind=kind, ref=ref, value=self.take_number())
        lane = self.take_identifier("lane id")
        self.take_keyword("TO")
        return SetLeadTime(lane=lane, days=self.take_number())

    def _parse_disable(self) -> Statement:
        kind = self.take_keyword("FACTORY", "SUPPLIER", "LANE").lower()
        return Disable(kind=kind, ref=self.take_identifier(f"{kind} id"))

    def _parse_enable(self) -> Statement:
        kind = self.take_keyword("FACTORY", "SUPPLIER", "LANE").lower()
        return Enable(kind=kind, ref=self.take_identifier(f"{kind} id"))

    def _parse_restrict(self) -> Statement:
        self.take_keyword("RETAILER")
        retailer = self.take_identifier("retailer id")
        self.take_keyword("TO")
        self.take_punct("[")
        allowed = [self.take_identifier("factory id")]
        while self.peek().kind == "PUNCT" and self.peek().text == ",":
            self.next()
            allowed.append(self.take_identifier("factory id"))
        self.take_punct("]")
        return RestrictRetailer(retailer=retailer, allowed=tuple(allowed))

    def _parse_adjust(self) -> Statement:
        what = self.take_keyword("PRICE", "SHIP")
        if what == "PRICE":
            self.take_keyword("MATERIAL")
            material = self.take_identifier("material id")
            supplier = None
            if self.at_keyword("AT"):
                self.next()
                supplier = self.take_identifier("supplier id")
            mode, amount = self._parse_adjust_mode()
            return AdjustPrice(material=material, supplier=supplier, mode=mode, amount=amount)
        self.take_keyword("COST")
        target_kind = self.take_keyword("LANE", "REGION").lower()
        target = self.take_identifier("lane id") if target_kind == "lane" else self.take_name()
        mode, amount = self._parse_adjust_mode()
        return AdjustShipCost(target_kind=target_kind, target=target, mode=mode, amount=amount)

    def _parse_adjust_mode(self) -> tuple[str, float]:
        mode = self.take_keyword("BY", "TO", "TIMES").lower()
        return mode, self.take_number()

    def _parse_shift(self) -> Statement:
        self.take_keyword("DUE")
        self.take_keyword("DATE")
        selector = self.parse_selector()
        self.take_keyword("BY")
        return ShiftDueDate(selector=selector, days=self.take_int("whole number of days"))

    def _parse_add(self) -> Statement:
        self.take_keyword("LANE")
        origin = self.take_identifier("origin node id")
        self.take_punct("->")
        destination = self.take_identifier("destination node id")
        self.take_keyword("COST")
        cost = self.take_number()
        self.take_keyword("CAPACITY")
        capacity = self.take_number()
        self.take_keyword("LEADTIME")
        lead = self.take_number()
        return AddLane(origin=origin, destination=destination, cost=cost,
                       capacity=capacity, lead_time=lead)

    def _parse_query(self) -> Statement:
        form = self.take_keyword("INVENTORY", "CHEAPEST", "SHIPMENTS", "TOP", "FRACTION")
        if form == "INVENTORY":
            self.take_keyword("SUPPLIER")
            supplier = self.take_identifier("supplier id")
            self.take_keyword("MATERIAL")
            material = self.take_identifier("material id")
            return Query(SupplierInventory(supplier=supplier, material=material))
        if form == "CHEAPEST":
            self.take_keyword("LANE")
            origin = self.take_identifier("origin node id")
            self.take_punct("->")
            destination = self.take_identifier("destination node id")
            return Query(CheapestLane(origin=origin, destination=destination))
        if form == "SHIPMENTS":
            self.take_keyword("PRODUCT")
            product = self.take_identifier("product id")
            self.take_keyword("TO")
            self.take_keyword("RETAILER")
            retailer = self.take_identifier("retailer id")
            return Query(ShipmentQuantity(product=product, retailer=retailer))
        if form == "TOP":
            self.take_keyword("FACTORY")
            return Query(TopFactoryByOutput(period=self._parse_period()))
        self.take_keyword("PLANS")
        self.take_keyword("WHERE")
        tok = self.peek()
        metric = self.take_identifier("metric").lower()
        if metric not in QUERY_METRICS:
            raise ScenarioParseError(
                f"unknown metric {metric!r}", tok.line, tok.column,
                expected=tuple(sorted(QUERY_METRICS)))
        cmp_tok = self.peek()
        if cmp_tok.kind != "PUNCT" or cmp_tok.text not in (">", ">=", "<", "<="):
            raise ScenarioParseError(
                f"expected comparator, got {cmp_tok.text!r}", cmp_tok.line, cmp_tok.column,
                expected=(">", ">=", "<", "<="))
        self.next()
        threshold = self.take_number()
        return Query(FractionPlansWhere(metric=metric, comparator=cmp_tok.text,
                                        threshold=threshold, period=self._parse_period()))

    def _parse_period(self) -> Period:
        kind = self.take_keyword("LAST", "FROM")
        if kind == "LAST":
            days = self.take_int("number of days")
            self.take_keyword("DAYS")
            return Period("last", days)
        a = self.take_int("day index")
        self.take_keyword("TO")
        b = self.take_int("day index")
        return Period("range", a, b)


def parse(text: str) -> ScenarioScript:
    """Parse scenario text; the canonical render of the result re-parses to an equal script."""
    return _Parser(_tokenize(text)).parse_script()


# ---------------------------------------------------------------------------
# Canonical rendering

def _fmt_number(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


_PLAIN_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _fmt_name(value: str) -> str:
    return value if _PLAIN_NAME_RE.match(value) else f'"{value}"'


def _fmt_selector(sel: Selector) -> str:
    if sel.kind == "all":
        return "ALL"
    if sel.kind == "attr":
        return f"ATTR {sel.key}={_fmt_name(sel.value)}"
    if sel.kind == "region":
        return f"REGION {_fmt_name(sel.value)}"
    return f"{sel.kind.upper()} {sel.value}"


def _fmt_period(period: Period) -> str:
    if period.kind == "last":
        return f"LAST {period.a} DAYS"
    return f"FROM {period.a} TO {period.b}"


def render_statement(stmt: Statement) -> str:
    if isinstance(stmt, ScaleDemand):
        return f"SCALE DEMAND {_fmt_selector(stmt.selector)} BY {_fmt_number(stmt.factor)}"
    if isinstance(stmt, SetDemand):
        return f"SET DEMAND {stmt.record} TO {_fmt_number(stmt.quantity)}"
    if isinstance(stmt, SetCapacity):
        return f"SET CAPACITY {stmt.kind.upper()} {stmt.ref} TO {_fmt_number(stmt.value)}"
    if isinstance(stmt, SetLeadTime):
        return f"SET LEADTIME {stmt.lane} TO {_fmt_number(stmt.days)}"
    if isinstance(stmt, Disable):
        return f"DISABLE {stmt.kind.upper()} {stmt.ref}"
    if isinstance(stmt, Enable):
        return f"ENABLE {stmt.kind.upper()} {stmt.ref}"
    if isinstance(stmt, RestrictRetailer):
        return f"RESTRICT RETAILER {stmt.retailer} TO [{', '.join(stmt.allowed)}]"
    if isinstance(stmt, AdjustPrice):
        at = f" AT {stmt.supplier}" if stmt.supplier else ""
        return (f"ADJUST PRICE MATERIAL {stmt.material}{at} "
                f"{stmt.mode.upper()} {_fmt_number(stmt.amount)}")
    if isinstance(stmt, AdjustShipCost):
        target = stmt.target if stmt.target_kind == "lane" else _fmt_name(stmt.target)
        return (f"ADJUST SHIP COST {stmt.target_kind.upper()} {target} "
                f"{stmt.mode.upper()} {_fmt_number(stmt.amount)}")
    if isinstance(stmt, ShiftDueDate):
        return f"SHIFT DUE DATE {_fmt_selector(stmt.selector)} BY {stmt.days}"
    if isinstance(stmt, AddLane):
        return (f"ADD LANE {stmt.origin} -> {stmt.destination} COST {_fmt_number(stmt.cost)} "
                f"CAPACITY {_fmt_number(stmt.capacity)} LEADTIME {_fmt_number(stmt.lead_time)}")
    if isinstance(stmt, Query):
        return _render_query(stmt.form)
    raise TypeError(f"cannot render {type(stmt).__name__}")


def _render_query(form) -> str:
    if isinstance(form, SupplierInventory):
        return f"QUERY INVENTORY SUPPLIER {form.supplier} MATERIAL {form.material}"
    if isinstance(form, CheapestLane):
        return f"QUERY CHEAPEST LANE {form.origin} -> {form.destination}"
    if isinstance(form, ShipmentQuantity):
        return f"QUERY SHIPMENTS PRODUCT {form.product} TO RETAILER {form.retailer}"
    if isinstance(form, TopFactoryByOutput):
        return f"QUERY TOP FACTORY {_fmt_period(form.period)}"
    if isinstance(form, FractionPlansWhere):
        return (f"QUERY FRACTION PLANS WHERE {form.metric} {form.comparator} "
                f"{_fmt_number(form.threshold)} {_fmt_period(form.period)}")
    raise TypeError(f"cannot render query {type(form).__name__}")


def render(script: ScenarioScript) -> str:
    """Canonical single-line text; parse(render(s)) == s."""
    return "; ".join(render_statement(s) for s in script.statements)


# ---------------------------------------------------------------------------
# Application

def _select_records(selector: Selector, network: SupplyNetwork,
                    records: tuple[DemandRecord, ...]) -> list[str]:
    if selector.kind == "all":
        matched = [r.id for r in records]
    elif selector.kind == "retailer":
        if selector.value not in network.retailers:
            raise UnresolvedReferenceError(selector.value, "retailer")
        matched = [r.id for r in records if r.retailer == selector.value]
    elif selector.kind == "product":
        if selector.value not in network.products:
            raise UnresolvedReferenceError(selector.value, "product")
        matched = [r.id for r in records if r.product == selector.value]
    elif selector.kind == "record":
        matched = [r.id for r in records if r.id == selector.value]
        if not matched:
            raise UnresolvedReferenceError(selector.value, "demand record")
    elif selector.kind == "attr":
        matched = [r.id for r in records if r.attributes.get(selector.key) == selector.value]
    elif selector.kind == "region":
        regions = {rid for rid, r in network.retailers.items() if r.region == selector.value}
        if not regions:
            raise UnresolvedReferenceError(selector.value, "region")
        matched = [r.id for r in records if r.retailer in regions]
    else:
        raise UnresolvedReferenceError(selector.kind, "selector")
    if not matched:
        raise UnresolvedReferenceError(_fmt_selector(selector), "demand selector")
    return matched


def _adjusted(current: float, mode: str, amount: float, what: str) -> float:
    if mode == "by":
        value = current + amount
    elif mode == "to":
        value = amount
    else:
        if amount < 0:
            raise IllegalValueError(f"{what}: multiplier must be >= 0, got {amount}")
        value = current * amount
    if value < 0:
        raise IllegalValueError(f"{what}: result {value:g} would be negative")
    return value


class _Workspace:
    """Mutable copies of the dataset collections while a script applies."""

    def __init__(self, network: SupplyNetwork, demand: DemandPlan) -> None:
        self.network = network
        self.suppliers = dict(network.suppliers)
        self.factories = dict(network.factories)
        self.lanes = dict(network.lanes)
        self.records = {r.id: r for r in demand.records}
        self.record_order = [r.id for r in demand.records]

    def current_network(self) -> SupplyNetwork:
        return replace(self.network, suppliers=dict(self.suppliers),
                       factories=dict(self.factories), lanes=dict(self.lanes))

    def current_records(self) -> tuple[DemandRecord, ...]:
        return tuple(self.records[rid] for rid in self.record_order)

    def node(self, kind: str, ref: str):
        table = {"factory": self.factories, "supplier": self.suppliers, "lane": self.lanes}[kind]
        if ref not in table:
            raise UnresolvedReferenceError(ref, kind)
        return table[ref]

    def put_node(self, kind: str, ref: str, value) -> None:
        {"factory": self.factories, "supplier": self.suppliers, "lane": self.lanes}[kind][ref] = value


def apply(script: ScenarioScript, network: SupplyNetwork, demand: DemandPlan,
          ) -> tuple[SupplyNetwork, DemandPlan, ApplyLog]:
    """Apply edits in order to copies of the dataset; the baseline is never touched."""
    ws = _Workspace(network, demand)
    log: list[ApplyEntry] = []

    for stmt in script.statements:
        if isinstance(stmt, Query):
            raise QueryNotApplicableError(
                "query statements are answered by the insights engine and cannot be "
                "applied as scenario edits")
        log.append(_apply_statement(stmt, ws))

    new_network = replace(network, suppliers=ws.suppliers, factories=ws.factories,
                          lanes=ws.lanes)
    new_demand = replace(demand, records=ws.current_records())
    return new_network, new_demand, tuple(log)


def check(script: ScenarioScript, network: SupplyNetwork, demand: DemandPlan) -> None:
    """Validate a script against a dataset without keeping the result.

    Query-only scripts validate their entity references; edit scripts dry-run.
    Mixed scripts are rejected: a single script either edits the model or asks
    one question of it.
    """
    if script.has_queries():
        if not script.is_query_only():
            raise QueryNotApplicableError(
                "a script cannot mix queries with scenario edits")
        if len(script.statements) != 1:
            raise QueryNotApplicableError("query scripts must contain exactly one query")
        _check_query_refs(script.statements[0].form, network)
        return
    apply(script, network, demand)


def _check_query_refs(form, network: SupplyNetwork) -> None:
    if isinstance(form, SupplierInventory):
        if form.supplier not in network.suppliers:
            raise UnresolvedReferenceError(form.supplier, "supplier")
        if form.material not in network.materials:
            raise UnresolvedReferenceError(form.material, "material")
    elif isinstance(form, CheapestLane):
        known = set(network.suppliers) | set(network.factories) | set(network.retailers)
        for node in (form.origin, form.destination):
            if node not in known:
                raise UnresolvedReferenceError(node, "node")
    elif isinstance(form, ShipmentQuantity):
        if form.product not in network.products:
            raise UnresolvedReferenceError(form.product, "product")
        if form.retailer not in network.retailers:
            raise UnresolvedReferenceError(form.retailer, "retailer")
    # history-backed forms carry no dataset references to resolve


def _apply_statement(stmt: Statement, ws: _Workspace) -> ApplyEntry:
    text = render_statement(stmt)

    if isinstance(stmt, ScaleDemand):
        if stmt.factor <= 0:
            raise IllegalValueError(f"scale factor must be > 0, got {stmt.factor:g}")
        ids = _select_records(stmt.selector, ws.current_network(), ws.current_records())
        prior = {}
        for rid in ids:
            record = ws.records[rid]
            prior[rid] = record.quantity
            ws.records[rid] = replace(record, quantity=record.quantity * stmt.factor)
        return ApplyEntry(text, tuple(ids), prior)

    if isinstance(stmt, SetDemand):
        if stmt.record not in ws.records:
            raise UnresolvedReferenceError(stmt.record, "demand record")
        if stmt.quantity < 0:
            raise IllegalValueError(f"quantity must be >= 0, got {stmt.quantity:g}")
        record = ws.records[stmt.record]
        prior = {stmt.record: record.quantity}
        ws.records[stmt.record] = replace(record, quantity=stmt.quantity)
        return ApplyEntry(text, (stmt.record,), prior)

    if isinstance(stmt, SetCapacity):
        if stmt.value < 0:
            raise IllegalValueError(f"capacity must be >= 0, got {stmt.value:g}")
        node = ws.node(stmt.kind, stmt.ref)
        field_name = {"factory": "production_capacity", "supplier": "capacity",
                      "lane": "capacity"}[stmt.kind]
        prior = {stmt.ref: getattr(node, field_name)}
        ws.put_node(stmt.kind, stmt.ref, replace(node, **{field_name: stmt.value}))
        return ApplyEntry(text, (stmt.ref,), prior)

    if isinstance(stmt, SetLeadTime):
        if stmt.days < 0:
            raise IllegalValueError(f"lead time must be >= 0, got {stmt.days:g}")
        lane = ws.node("lane", stmt.lane)
        prior = {stmt.lane: lane.lead_time}
        ws.put_node("lane", stmt.lane, replace(lane, lead_time=stmt.days))
        return ApplyEntry(text, (stmt.lane,), prior)

    if isinstance(stmt, (Disable, Enable)):
        target_active = isinstance(stmt, Enable)
        node = ws.node(stmt.kind, stmt.ref)
        prior = {stmt.ref: node.active}
        ws.put_node(stmt.kind, stmt.ref, replace(node, active=target_active))
        return ApplyEntry(text, (stmt.ref,), prior)

    if isinstance(stmt, RestrictRetailer):
        if stmt.retailer not in ws.network.retailers:
            raise UnresolvedReferenceError(stmt.retailer, "retailer")
        if not stmt.allowed:
            raise IllegalValueError("RESTRICT RETAILER needs at least one allowed factory")
        for fac in stmt.allowed:
            if fac not in ws.factories:
                raise UnresolvedReferenceError(fac, "factory")
        allowed = set(stmt.allowed)
        touched = []
        prior = {}
        for lane in sorted(ws.lanes.values(), key=lambda l: l.id):
            if (lane.destination == stmt.retailer and lane.origin in ws.factories
                    and lane.origin not in allowed and lane.active):
                prior[lane.id] = lane.active
                ws.lanes[lane.id] = replace(lane, active=False)
                touched.append(lane.id)
        return ApplyEntry(text, tuple(touched), prior)

    if isinstance(stmt, AdjustPrice):
        if stmt.material not in ws.network.materials:
            raise UnresolvedReferenceError(stmt.material, "material")
        if stmt.supplier is not None:
            if stmt.supplier not in ws.suppliers:
                raise UnresolvedReferenceError(stmt.supplier, "supplier")
            targets = [ws.suppliers[stmt.supplier]]
            if targets[0].material != stmt.material:
                raise UnresolvedReferenceError(
                    f"{stmt.supplier} does not carry {stmt.material}", "supplier material")
        else:
            targets = [s for s in ws.suppliers.values() if s.material == stmt.material]
            if not targets:
                raise UnresolvedReferenceError(stmt.material, "supplier for material")
        prior = {}
        touched = []
        for s in sorted(targets, key=lambda s: s.id):
            new_price = _adjusted(s.unit_price, stmt.mode, stmt.amount,
                                  f"price of {stmt.material} at {s.id}")
            prior[s.id] = s.unit_price
            ws.suppliers[s.id] = replace(s, unit_price=new_price)
            touched.append(s.id)
        return ApplyEntry(text, tuple(touched), prior)

    if isinstance(stmt, AdjustShipCost):
        if stmt.target_kind == "lane":
            lane = ws.node("lane", stmt.target)
            targets = [lane]
        else:
            retailers = {rid for rid, r in ws.network.retailers.items()
                         if r.region == stmt.target}
            if not retailers:
                raise UnresolvedReferenceError(stmt.target, "region")
            targets = [l for l in ws.lanes.values() if l.destination in retailers]
            if not targets:
                raise UnresolvedReferenceError(stmt.target, "lane into region")
        prior = {}
        touched = []
        for lane in sorted(targets, key=lambda l: l.id):
            new_cost = _adjusted(lane.unit_ship_cost, stmt.mode, stmt.amount,
                                 f"ship cost on {lane.id}")
            prior[lane.id] = lane.unit_ship_cost
            ws.lanes[lane.id] = replace(lane, unit_ship_cost=new_cost)
            touched.append(lane.id)
        return ApplyEntry(text, tuple(touched), prior)

    if isinstance(stmt, ShiftDueDate):
        ids = _select_records(stmt.selector, ws.current_network(), ws.current_records())
        prior = {}
        for rid in ids:
            record = ws.records[rid]
            prior[rid] = record.due_day
            ws.records[rid] = replace(record, due_day=record.due_day + stmt.days)
        return ApplyEntry(text, tuple(ids), prior)

    if isinstance(stmt, AddLane):
        if stmt.cost < 0 or stmt.capacity < 0 or stmt.lead_time < 0:
            raise IllegalValueError("lane cost, capacity, and lead time must be >= 0")
        if stmt.origin in ws.suppliers:
            if stmt.destination not in ws.factories:
                raise UnresolvedReferenceError(
                    stmt.destination, "factory (supplier lanes end at factories)")
        elif stmt.origin in ws.factories:
            if stmt.destination not in ws.network.retailers:
                raise UnresolvedReferenceError(
                    stmt.destination, "retailer (factory lanes end at retailers)")
        else:
            raise UnresolvedReferenceError(stmt.origin, "origin node")
        # One lane per ordered pair: adding over an existing pair replaces its terms.
        existing = next((l for l in ws.lanes.values()
                         if l.origin == stmt.origin and l.destination == stmt.destination),
                        None)
        if existing is not None:
            prior = {existing.id: {"unit_ship_cost": existing.unit_ship_cost,
                                   "capacity": existing.capacity,
                                   "lead_time": existing.lead_time,
                                   "active": existing.active}}
            ws.lanes[existing.id] = replace(
                existing, unit_ship_cost=stmt.cost, capacity=stmt.capacity,
                lead_time=stmt.lead_time, active=True)
            return ApplyEntry(text, (existing.id,), prior)
        lane_id = f"{stmt.origin}_{stmt.destination}"
        while lane_id in ws.lanes:
            lane_id += "_added"
        ws.lanes[lane_id] = Lane(
            id=lane_id, origin=stmt.origin, destination=stmt.destination,
            unit_ship_cost=stmt.cost, capacity=stmt.capacity, lead_time=stmt.lead_time,
            active=True,
        )
        return ApplyEntry(text, (lane_id,), {})

    raise QueryNotApplicableError(f"cannot apply {type(stmt).__name__}")


__all__ = [
    "ScenarioError", "ScenarioParseError", "UnknownKeywordError",
    "UnresolvedReferenceError", "IllegalValueError", "QueryNotApplicableError",
    "Selector", "ScaleDemand", "SetDemand", "SetCapacity", "SetLeadTime",
    "Disable", "Enable", "RestrictRetailer", "AdjustPrice", "AdjustShipCost",
    "ShiftDueDate", "AddLane", "Query", "Statement", "ScenarioScript",
    "ApplyEntry", "ApplyLog",
    "parse", "render", "render_statement", "apply", "check",
]
