"""Visualization query language: abstract syntax, parser, validator, canonicalizer.

The language is a small SQL dialect with a leading VISUALIZE clause naming the
chart type:

    VISUALIZE <chart> SELECT <x>, <y> FROM <table>
        [JOIN <table2> ON <a> = <b>] [WHERE <pred>] [GROUP BY <cols>]
        [BIN <col> BY <unit>] [ORDER BY <key> [ASC|DESC]] [LIMIT <n>]

Keywords are case-insensitive; identifiers keep their original case through
parsing and are lower-cased only by :func:`canonicalize`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Union


class ChartType(Enum):
    BAR = "BAR"
    PIE = "PIE"
    LINE = "LINE"
    SCATTER = "SCATTER"


class AggregateFn(Enum):
    COUNT = "COUNT"
    SUM = "SUM"
    AVG = "AVG"
    MAX = "MAX"
    MIN = "MIN"


class BinUnit(Enum):
    YEAR = "YEAR"
    MONTH = "MONTH"
    DAY = "DAY"
    WEEKDAY = "WEEKDAY"


class SortDirection(Enum):
    ASC = "ASC"
    DESC = "DESC"


Literal = Union[int, float, str]

COMPARISON_OPS = ("=", "!=", "<", "<=", ">", ">=", "LIKE")


@dataclass(frozen=True)
class SelectItem:
    """One select expression: a bare column or an aggregate over a column."""

    column: str
    aggregate: Optional[AggregateFn] = None

    def __post_init__(self) -> None:
        if not self.column:
            raise ValueError("select item column must be non-empty")

    def expression(self, lower: bool = False) -> str:
        col = self.column.lower() if lower else self.column
        if self.aggregate is None:
            return col
        return f"{self.aggregate.value}({col})"


@dataclass(frozen=True)
class Comparison:
    column: str
    op: str
    value: Literal

    def __post_init__(self) -> None:
        if self.op not in COMPARISON_OPS:
            raise ValueError(f"unknown comparison operator {self.op!r}")


@dataclass(frozen=True)
class Membership:
    """column IN (v1, v2, ...); the list is non-empty."""

    column: str
    values: tuple[Literal, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("IN list must be non-empty")


@dataclass(frozen=True)
class BoolOp:
    op: str  # "AND" | "OR"
    parts: tuple["Predicate", ...]

    def __post_init__(self) -> None:
        if self.op not in ("AND", "OR"):
            raise ValueError(f"unknown boolean operator {self.op!r}")
        if len(self.parts) < 2:
            raise ValueError("boolean node needs at least two operands")


Predicate = Union[Comparison, Membership, BoolOp]


@dataclass(frozen=True)
class BinClause:
    column: str
    unit: BinUnit


@dataclass(frozen=True)
class OrderClause:
    key: SelectItem
    direction: SortDirection = SortDirection.ASC


@dataclass(frozen=True)
class JoinClause:
    table: str
    left_column: str
    right_column: str


@dataclass(frozen=True)
class VqlQuery:
    """Parsed form of one VQL statement: chart type plus SQL-like clauses."""

    chart: ChartType
    x: SelectItem
    y: SelectItem
    from_table: str
    join: Optional[JoinClause] = None
    where: Optional[Predicate] = None
    group_by: Optional[tuple[str, ...]] = None
    bin: Optional[BinClause] = None
    order: Optional[OrderClause] = None
    limit: Optional[int] = None

    def __post_init__(self) -> None:
        if self.limit is not None and self.limit < 1:
            raise ValueError("LIMIT must be >= 1")

    @property
    def select(self) -> tuple[SelectItem, SelectItem]:
        return (self.x, self.y)

    def has_aggregate(self) -> bool:
        return self.x.aggregate is not None or self.y.aggregate is not None

    def has_grouping(self) -> bool:
        return bool(self.group_by) or self.bin is not None


class ParseError(Exception):
    """Raised on malformed VQL; carries the byte offset and expected tokens."""

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        super().__init__(f"{message} at offset {offset}" + (f" (expected one of: {', '.join(expected)})" if expected else ""))
        self.offset = offset
        self.expected = expected


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)?)
  | (?P<string>'[^']*'|"[^"]*")
  | (?P<symbol><=|>=|!=|<>|[=<>(),])
    """,
    re.VERBOSE,
)

_KEYWORDS = {
    "VISUALIZE", "SELECT", "FROM", "JOIN", "ON", "WHERE", "GROUP", "BY",
    "BIN", "ORDER", "LIMIT", "AND", "OR", "IN", "NOT", "LIKE", "ASC", "DESC",
}


@dataclass(frozen=True)
class _Token:
    kind: str  # "ident" | "number" | "string" | "symbol" | "eof"
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            kind = m.lastgroup
            tok = m.group()
            if kind == "symbol" and tok == "<>":
                tok = "!="
            tokens.append(_Token(kind, tok, pos))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


# ---------------------------------------------------------------------------
# Parser

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def cur(self) -> _Token:
        return self.tokens[self.i]

    def _advance(self) -> _Token:
        tok = self.cur
        self.i += 1
        return tok

    def _is_keyword(self, *names: str) -> bool:
        return self.cur.kind == "ident" and self.cur.text.upper() in names

    def accept_keyword(self, *names: str) -> Optional[str]:
        if self._is_keyword(*names):
            return self._advance().text.upper()
        return None

    def expect_keyword(self, *names: str) -> str:
        kw = self.accept_keyword(*names)
        if kw is None:
            raise ParseError(f"unexpected token {self.cur.text!r}", self.cur.pos, names)
        return kw

    def accept_symbol(self, *symbols: str) -> Optional[str]:
        if self.cur.kind == "symbol" and self.cur.text in symbols:
            return self._advance().text
        return None

    def expect_symbol(self, *symbols: str) -> str:
        sym = self.accept_symbol(*symbols)
        if sym is None:
            raise ParseError(f"unexpected token {self.cur.text!r}", self.cur.pos, symbols)
        return sym

    def expect_identifier(self, what: str = "identifier") -> str:
        if self.cur.kind != "ident" or self.cur.text.upper() in _KEYWORDS:
            raise ParseError(f"expected {what}, got {self.cur.text!r}", self.cur.pos, (what,))
        return self._advance().text

    def parse_query(self) -> VqlQuery:
        self.expect_keyword("VISUALIZE")
        chart_tok = self.cur
        chart_name = self.expect_identifier("chart type").upper()
        try:
            chart = ChartType(chart_name)
        except ValueError:
            raise ParseError(
                f"unknown chart type {chart_tok.text!r}", chart_tok.pos,
                tuple(c.value for c in ChartType),
            ) from None
        self.expect_keyword("SELECT")
        x = self.parse_select_item()
        self.expect_symbol(",")
        y = self.parse_select_item()
        if self.accept_symbol(","):
            raise ParseError("SELECT takes exactly two items", self.cur.pos)
        self.expect_keyword("FROM")
        from_table = self.expect_identifier("table name")

        join = None
        if self.accept_keyword("JOIN"):
            table = self.expect_identifier("table name")
            self.expect_keyword("ON")
            left = self.expect_identifier("column name")
            self.expect_symbol("=")
            right = self.expect_identifier("column name")
            join = JoinClause(table, left, right)

        where = None
        if self.accept_keyword("WHERE"):
            where = self.parse_predicate()

        group_by = None
        bin_clause = None
        order = None
        limit = None

        if self.accept_keyword("GROUP"):
            self.expect_keyword("BY")
            cols = [self.expect_identifier("column name")]
            while self.accept_symbol(","):
                cols.append(self.expect_identifier("column name"))
            group_by = tuple(cols)

        if self.accept_keyword("BIN"):
            col = self.expect_identifier("column name")
            self.expect_keyword("BY")
            unit_tok = self.cur
            unit_name = self.expect_identifier("bin unit").upper()
            try:
                unit = BinUnit(unit_name)
            except ValueError:
                raise ParseError(
                    f"unknown bin unit {unit_tok.text!r}", unit_tok.pos,
                    tuple(u.value for u in BinUnit),
                ) from None
            bin_clause = BinClause(col, unit)

        if self.accept_keyword("ORDER"):
            self.expect_keyword("BY")
            key = self.parse_select_item()
            direction = SortDirection.ASC
            kw = self.accept_keyword("ASC", "DESC")
            if kw is not None:
                direction = SortDirection(kw)
            order = OrderClause(key, direction)

        if self.accept_keyword("LIMIT"):
            tok = self.cur
            if tok.kind != "number" or "." in tok.text or tok.text.startswith("-"):
                raise ParseError("LIMIT requires a positive integer", tok.pos, ("integer",))
            self._advance()
            value = int(tok.text)
            if value < 1:
                raise ParseError("LIMIT requires a positive integer", tok.pos)
            limit = value

        if self.cur.kind != "eof":
            raise ParseError(f"trailing input {self.cur.text!r}", self.cur.pos, ("end of input",))

        return VqlQuery(
            chart=chart, x=x, y=y, from_table=from_table, join=join, where=where,
            group_by=group_by, bin=bin_clause, order=order, limit=limit,
        )

    def parse_select_item(self) -> SelectItem:
        name_tok = self.cur
        name = self.expect_identifier("column or aggregate")
        if self.accept_symbol("("):
            try:
                agg = AggregateFn(name.upper())
            except ValueError:
                raise ParseError(
                    f"unknown function {name_tok.text!r}", name_tok.pos,
                    tuple(a.value for a in AggregateFn),
                ) from None
            column = self.expect_identifier("column name")
            self.expect_symbol(")")
            return SelectItem(column, agg)
        return SelectItem(name)

    def parse_predicate(self) -> Predicate:
        return self._parse_or()

    def _parse_or(self) -> Predicate:
        parts = [self._parse_and()]
        while self.accept_keyword("OR"):
            parts.append(self._parse_and())
        if len(parts) == 1:
            return parts[0]
        return BoolOp("OR", tuple(parts))

    def _parse_and(self) -> Predicate:
        parts = [self._parse_atom()]
        while self.accept_keyword("AND"):
            parts.append(self._parse_atom())
        if len(parts) == 1:
            return parts[0]
        return BoolOp("AND", tuple(parts))

    def _parse_atom(self) -> Predicate:
        if self.accept_symbol("("):
            inner = self._parse_or()
            self.expect_symbol(")")
            return inner
        column = self.expect_identifier("column name")
        if self.accept_keyword("IN"):
            self.expect_symbol("(")
            values = [self._parse_literal()]
            while self.accept_symbol(","):
                values.append(self._parse_literal())
            self.expect_symbol(")")
            return Membership(column, tuple(values))
        if self.accept_keyword("LIKE"):
            return Comparison(column, "LIKE", self._parse_literal())
        op = self.accept_symbol("=", "!=", "<", "<=", ">", ">=")
        if op is None:
            raise ParseError(
                f"unexpected token {self.cur.text!r}", self.cur.pos,
                ("=", "!=", "<", "<=", ">", ">=", "IN", "LIKE"),
            )
        return Comparison(column, op, self._parse_literal())

    def _parse_literal(self) -> Literal:
        tok = self.cur
        if tok.kind == "number":
            self._advance()
            return float(tok.text) if "." in tok.text else int(tok.text)
        if tok.kind == "string":
            self._advance()
            return tok.text[1:-1]
        raise ParseError(f"expected literal, got {tok.text!r}", tok.pos, ("number", "string"))


def parse_vql(text: str) -> VqlQuery:
    """Parse VQL source into its abstract form.

    Keyword matching is case-insensitive; identifiers keep their original
    case. Raises :class:`ParseError` on malformed input, unknown chart types
    and unknown bin units.
    """
    if not text or not text.strip():
        raise ParseError("empty input", 0, ("VISUALIZE",))
    return _Parser(text).parse_query()


# ---------------------------------------------------------------------------
# Validation

@dataclass(frozen=True)
class Violation:
    kind: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, message: str) -> None:
        self.violations.append(Violation(kind, message))

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


# Schema shape: {table_name: {column_name: "number"|"text"|"date"}}
DatabaseSchema = Mapping[str, Mapping[str, str]]


def _resolve_table(schema: DatabaseSchema, name: str) -> Optional[str]:
    for tbl in schema:
        if tbl.lower() == name.lower():
            return tbl
    return None


def _resolve_column(columns: Mapping[str, str], name: str) -> Optional[str]:
    # strip a table qualifier if present
    bare = name.split(".")[-1]
    for col in columns:
        if col.lower() == bare.lower():
            return col
    return None


def _predicate_columns(pred: Predicate) -> Iterable[str]:
    if isinstance(pred, (Comparison, Membership)):
        yield pred.column
    else:
        for part in pred.parts:
            yield from _predicate_columns(part)


def validate(query: VqlQuery, schema: DatabaseSchema) -> ValidationReport:
    """Check a query against a database schema; violations are data, not errors."""
    report = ValidationReport()

    tables: list[Mapping[str, str]] = []
    for name in [query.from_table] + ([query.join.table] if query.join else []):
        resolved = _resolve_table(schema, name)
        if resolved is None:
            report.add("unknown-table", f"table {name!r} not in schema")
        else:
            tables.append(schema[resolved])

    def column_type(name: str) -> Optional[str]:
        for cols in tables:
            resolved = _resolve_column(cols, name)
            if resolved is not None:
                return cols[resolved]
        return None

    def check_column(name: str, context: str) -> Optional[str]:
        ctype = column_type(name)
        if ctype is None and tables:
            report.add("unknown-column", f"column {name!r} in {context} not in schema")
        return ctype

    for item in query.select:
        ctype = check_column(item.column, "SELECT")
        if item.aggregate is not None and ctype is not None:
            agg = item.aggregate
            if agg in (AggregateFn.SUM, AggregateFn.AVG) and ctype != "number":
                report.add("aggregate-type-mismatch", f"{agg.value} over non-number column {item.column!r}")
            if agg in (AggregateFn.MAX, AggregateFn.MIN) and ctype not in ("number", "date"):
                report.add("aggregate-type-mismatch", f"{agg.value} over text column {item.column!r}")

    if query.join is not None:
        check_column(query.join.left_column, "JOIN")
        check_column(query.join.right_column, "JOIN")

    if query.where is not None:
        for col in _predicate_columns(query.where):
            check_column(col, "WHERE")

    for col in query.group_by or ():
        check_column(col, "GROUP BY")

    if query.bin is not None:
        ctype = check_column(query.bin.column, "BIN")
        if ctype is not None and ctype != "date":
            report.add("bin-non-date", f"BIN over non-date column {query.bin.column!r}")

    if query.order is not None:
        key = query.order.key
        selected = {
            (item.column.lower(), item.aggregate) for item in query.select
        }
        if (key.column.lower(), key.aggregate) not in selected:
            report.add("order-key-not-selected", f"ORDER BY key {key.expression()!r} is not a select item")

    if query.has_aggregate() and not query.has_grouping():
        # both-aggregate queries still collapse to one group implicitly only
        # when both items aggregate; a bare column alongside one is ambiguous
        if query.x.aggregate is None or query.y.aggregate is None:
            report.add("aggregate-without-grouping", "aggregate select item without GROUP BY or BIN")

    return report


# ---------------------------------------------------------------------------
# Rendering and canonicalization

def _render_literal(value: Literal) -> str:
    if isinstance(value, bool):
        raise TypeError("boolean literals are not part of the language")
    if isinstance(value, (int, float)):
        if isinstance(value, float) and value.is_integer():
            return str(int(value))
        return str(value)
    return '"' + str(value) + '"'


def _sort_key(value: Literal):
    if isinstance(value, (int, float)):
        return (0, float(value), "")
    return (1, 0.0, str(value))


def _render_predicate(pred: Predicate, lower: bool, canonical: bool, parent: str = "") -> str:
    if isinstance(pred, Comparison):
        col = pred.column.lower() if lower else pred.column
        return f"{col} {pred.op} {_render_literal(pred.value)}"
    if isinstance(pred, Membership):
        col = pred.column.lower() if lower else pred.column
        values = sorted(pred.values, key=_sort_key) if canonical else list(pred.values)
        return f"{col} IN ({', '.join(_render_literal(v) for v in values)})"
    sep = f" {pred.op} "
    body = sep.join(_render_predicate(p, lower, canonical, pred.op) for p in pred.parts)
    if pred.op == "OR" and parent == "AND":
        return f"({body})"
    return body


def _render(query: VqlQuery, lower: bool, canonical: bool) -> str:
    ident = (lambda s: s.lower()) if lower else (lambda s: s)
    parts = [
        "VISUALIZE", query.chart.value,
        "SELECT", f"{query.x.expression(lower)}, {query.y.expression(lower)}",
        "FROM", ident(query.from_table),
    ]
    if query.join is not None:
        parts += ["JOIN", ident(query.join.table), "ON",
                  f"{ident(query.join.left_column)} = {ident(query.join.right_column)}"]
    if query.where is not None:
        parts += ["WHERE", _render_predicate(query.where, lower, canonical)]
    if query.group_by:
        parts += ["GROUP BY", ", ".join(ident(c) for c in query.group_by)]
    if query.bin is not None:
        parts += ["BIN", ident(query.bin.column), "BY", query.bin.unit.value]
    if query.order is not None:
        parts += ["ORDER BY", query.order.key.expression(lower), query.order.direction.value]
    if query.limit is not None:
        parts += ["LIMIT", str(query.limit)]
    return " ".join(parts)


def render_vql(query: VqlQuery) -> str:
    """Render back to VQL source; parse(render_vql(q)) is structurally equal to q."""
    return _render(query, lower=False, canonical=False)


def canonicalize(query: VqlQuery) -> str:
    """Deterministic canonical form used as the comparison key for SQL matching.

    Uppercase keywords, lower-cased identifiers, single spaces, IN lists
    sorted ascending, fixed clause order. Idempotent under re-parsing.
    """
    return _render(query, lower=True, canonical=True)


def sql_portion(canonical: str) -> str:
    """The canonical text minus the leading VISUALIZE clause."""
    tokens = canonical.split(" ", 2)
    return tokens[2] if len(tokens) > 2 else ""
