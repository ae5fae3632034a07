"""Executes the SQL-like portion of a query against an in-memory database.

The result is always a two-column table (x, y) backing the chart. Semantics,
in order: FROM/JOIN, WHERE (null fails every comparison), grouping (GROUP BY
columns plus bin labels), per-group aggregates, ORDER BY (stable), LIMIT.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime
from typing import Optional

from .datastore import Cell, Database, DATE, NUMBER, TEXT
from .vql import (
    AggregateFn, BinClause, BinUnit, BoolOp, Comparison, Membership, Predicate,
    SelectItem, SortDirection, VqlQuery,
)

NULL_GROUP_KEY = "(null)"


class ExecError(Exception):
    def __init__(self, kind: str, message: str = ""):
        super().__init__(message or kind)
        self.kind = kind


@dataclass
class ResultTable:
    """Two-column execution result; row order is meaningful only when ordered."""

    columns: tuple[tuple[str, str], tuple[str, str]]  # ((label, type), (label, type))
    rows: list[tuple[Cell, Cell]]
    ordered: bool = False

    def to_json(self) -> dict:
        return {
            "columns": [{"label": label, "type": ctype} for label, ctype in self.columns],
            "rows": [[x, y] for x, y in self.rows],
            "ordered": self.ordered,
        }


def _parse_date(cell: Cell) -> datetime:
    if isinstance(cell, str):
        for fmt in ("%Y-%m-%d", "%Y-%m-%d %H:%M:%S"):
            try:
                return datetime.strptime(cell, fmt)
            except ValueError:
                continue
    raise ExecError("unparseable-date", f"cannot parse date from {cell!r}")


def bin_label(cell: Cell, unit: BinUnit) -> str:
    """Calendar label for a date cell: YYYY, YYYY-MM, YYYY-MM-DD, or a day name."""
    d = _parse_date(cell)
    if unit is BinUnit.YEAR:
        return f"{d.year:04d}"
    if unit is BinUnit.MONTH:
        return f"{d.year:04d}-{d.month:02d}"
    if unit is BinUnit.DAY:
        return f"{d.year:04d}-{d.month:02d}-{d.day:02d}"
    return ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")[d.weekday()]


# ---------------------------------------------------------------------------
# Row assembly and filtering

def _working_rows(query: VqlQuery, db: Database) -> tuple[list[dict[str, Cell]], dict[str, str]]:
    """FROM/JOIN rows as column->cell dicts, plus a column->type map."""
    table = db.table(query.from_table)
    if table is None:
        raise ExecError("unknown-table", f"table {query.from_table!r} not found")
    types = {name.lower(): ctype for name, ctype in table.schema.columns}
    rows = [
        {name.lower(): cell for (name, _), cell in zip(table.schema.columns, row)}
        for row in table.rows
    ]
    if query.join is not None:
        right = db.table(query.join.table)
        if right is None:
            raise ExecError("unknown-table", f"table {query.join.table!r} not found")
        left_col = query.join.left_column.split(".")[-1].lower()
        right_col = query.join.right_column.split(".")[-1].lower()
        # the ON condition may name the columns in either order
        if left_col not in types and right.schema.column_name(left_col) is not None:
            left_col, right_col = right_col, left_col
        right_rows = [
            {name.lower(): cell for (name, _), cell in zip(right.schema.columns, row)}
            for row in right.rows
        ]
        joined = []
        for lrow in rows:
            if left_col not in lrow:
                raise ExecError("unknown-column", f"join column {left_col!r} not found")
            for rrow in right_rows:
                if right_col not in rrow:
                    raise ExecError("unknown-column", f"join column {right_col!r} not found")
                if lrow[left_col] is not None and lrow[left_col] == rrow[right_col]:
                    merged = dict(lrow)
                    for k, v in rrow.items():
                        merged.setdefault(k, v)
                    joined.append(merged)
        rows = joined
        for name, ctype in right.schema.columns:
            types.setdefault(name.lower(), ctype)
    return rows, types


def _cell(row: dict[str, Cell], column: str) -> Cell:
    key = column.split(".")[-1].lower()
    if key not in row:
        raise ExecError("unknown-column", f"column {column!r} not found")
    return row[key]


def _like_match(value: str, pattern: str) -> bool:
    regex = re.escape(pattern).replace(r"\%", ".*").replace("_", ".")
    return re.fullmatch(regex, value) is not None


def _compare(cell: Cell, op: str, literal) -> bool:
    if cell is None:
        return False
    if op == "LIKE":
        return isinstance(cell, str) and _like_match(cell, str(literal))
    if isinstance(literal, (int, float)) and not isinstance(cell, (int, float)):
        return False
    if isinstance(literal, str) and not isinstance(cell, str):
        return False
    if op == "=":
        return cell == literal
    if op == "!=":
        return cell != literal
    if op == "<":
        return cell < literal
    if op == "<=":
        return cell <= literal
    if op == ">":
        return cell > literal
    return cell >= literal


def _eval_predicate(pred: Predicate, row: dict[str, Cell]) -> bool:
    if isinstance(pred, Comparison):
        return _compare(_cell(row, pred.column), pred.op, pred.value)
    if isinstance(pred, Membership):
        return any(_compare(_cell(row, pred.column), "=", v) for v in pred.values)
    if pred.op == "AND":
        return all(_eval_predicate(p, row) for p in pred.parts)
    return any(_eval_predicate(p, row) for p in pred.parts)


# ---------------------------------------------------------------------------
# Aggregation

def _aggregate(fn: AggregateFn, column: str, rows: list[dict[str, Cell]]) -> Cell:
    values = [v for v in (_cell(r, column) for r in rows) if v is not None]
    if fn is AggregateFn.COUNT:
        return len(values)
    if not values:
        return None
    if fn is AggregateFn.SUM:
        return sum(values)
    if fn is AggregateFn.AVG:
        return sum(values) / len(values)
    if fn is AggregateFn.MAX:
        return max(values)
    return min(values)


def _group_key(row: dict[str, Cell], group_by: tuple[str, ...], bin_clause: Optional[BinClause]):
    key = []
    for col in group_by:
        cell = _cell(row, col)
        key.append(NULL_GROUP_KEY if cell is None else cell)
    if bin_clause is not None:
        key.append(bin_label(_cell(row, bin_clause.column), bin_clause.unit))
    return tuple(key)


def _item_value(item: SelectItem, query: VqlQuery, group_rows: list[dict[str, Cell]]) -> Cell:
    if item.aggregate is not None:
        return _aggregate(item.aggregate, item.column, group_rows)
    col = item.column.split(".")[-1].lower()
    if query.bin is not None and col == query.bin.column.split(".")[-1].lower():
        return bin_label(_cell(group_rows[0], query.bin.column), query.bin.unit)
    cell = _cell(group_rows[0], item.column)
    grouped = {c.split(".")[-1].lower() for c in (query.group_by or ())}
    if col in grouped and cell is None:
        return NULL_GROUP_KEY
    return cell


def _column_meta(item: SelectItem, query: VqlQuery, types: dict[str, str]) -> tuple[str, str]:
    label = item.expression()
    col = item.column.split(".")[-1].lower()
    base = types.get(col, TEXT)
    if item.aggregate in (AggregateFn.COUNT, AggregateFn.SUM, AggregateFn.AVG):
        return label, NUMBER
    if item.aggregate in (AggregateFn.MAX, AggregateFn.MIN):
        return label, base
    if query.bin is not None and col == query.bin.column.split(".")[-1].lower():
        return label, TEXT  # bin labels are calendar strings
    return label, base


def _sort_value(cell: Cell, ctype: str):
    # the "(null)" group label can land in a number column; bucket it after
    # properly typed cells so mixed keys stay comparable
    if ctype == NUMBER and isinstance(cell, (int, float)):
        return (0, float(cell), "")
    if ctype == DATE and isinstance(cell, str):
        try:
            return (0, _parse_date(cell).timestamp(), "")
        except ExecError:
            pass
    return (1, 0.0, str(cell))


def execute(query: VqlQuery, db: Database) -> ResultTable:
    """Run a query; the caller should have validated it against the schema."""
    rows, types = _working_rows(query, db)

    if query.where is not None:
        rows = [r for r in rows if _eval_predicate(query.where, r)]

    has_agg = query.has_aggregate()
    if query.has_grouping():
        groups: dict[tuple, list[dict[str, Cell]]] = {}
        for row in rows:
            groups.setdefault(_group_key(row, query.group_by or (), query.bin), []).append(row)
        out = [
            (_item_value(query.x, query, g), _item_value(query.y, query, g))
            for g in groups.values()
        ]
    elif has_agg:
        if query.x.aggregate is None or query.y.aggregate is None:
            raise ExecError(
                "aggregate-without-grouping",
                "aggregate select item alongside a bare column requires GROUP BY or BIN",
            )
        out = [] if not rows else [
            (_item_value(query.x, query, rows), _item_value(query.y, query, rows))
        ]
    else:
        out = [(_cell(r, query.x.column), _cell(r, query.y.column)) for r in rows]

    columns = (_column_meta(query.x, query, types), _column_meta(query.y, query, types))

    ordered = query.order is not None
    if query.order is not None:
        key = query.order.key
        if (key.column.lower(), key.aggregate) == (query.x.column.lower(), query.x.aggregate):
            idx, ctype = 0, columns[0][1]
        elif (key.column.lower(), key.aggregate) == (query.y.column.lower(), query.y.aggregate):
            idx, ctype = 1, columns[1][1]
        else:
            raise ExecError("order-key-not-selected", f"ORDER BY key {key.expression()!r} is not selected")
        present = [row for row in out if row[idx] is not None]
        missing = [row for row in out if row[idx] is None]
        present.sort(
            key=lambda row: _sort_value(row[idx], ctype),
            reverse=query.order.direction is SortDirection.DESC,
        )
        out = present + missing

    if query.limit is not None:
        out = out[: query.limit]

    return ResultTable(columns=columns, rows=out, ordered=ordered)


def execute_stage(query: VqlQuery, db: Database, stage: str, preview_rows: int = 50) -> ResultTable:
    """Data state after a pipeline stage: S1 raw preview, S2 filtered,
    S3 grouped, S4/S5 final."""
    if stage == "S1":
        table = db.table(query.from_table)
        if table is None:
            raise ExecError("unknown-table", f"table {query.from_table!r} not found")
        rows, types = _working_rows(VqlQuery(
            chart=query.chart, x=query.x, y=query.y, from_table=query.from_table,
        ), db)
        cols = table.schema.columns[:2] if len(table.schema.columns) >= 2 else table.schema.columns * 2
        out = [(r[cols[0][0].lower()], r[cols[1][0].lower()]) for r in rows[:preview_rows]]
        return ResultTable(columns=(cols[0], cols[1]), rows=out, ordered=False)
    if stage == "S2":
        rows, types = _working_rows(query, db)
        if query.where is not None:
            rows = [r for r in rows if _eval_predicate(query.where, r)]
        bare = lambda item: SelectItem(item.column)
        out = [(_cell(r, query.x.column), _cell(r, query.y.column)) for r in rows[:preview_rows]]
        sub = VqlQuery(chart=query.chart, x=bare(query.x), y=bare(query.y), from_table=query.from_table)
        columns = (_column_meta(sub.x, sub, types), _column_meta(sub.y, sub, types))
        return ResultTable(columns=columns, rows=out, ordered=False)
    if stage == "S3":
        import dataclasses

        truncated = dataclasses.replace(query, order=None, limit=None)
        return execute(truncated, db)
    if stage in ("S4", "S5"):
        return execute(query, db)
    raise ExecError("unknown-stage", f"no such stage {stage!r}")
