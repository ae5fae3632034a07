"""Database loading, typed schemas, and the two description artifacts.

Databases come from a SQLite file or a directory of CSV files (one table per
file, header row = column names). Loaded databases are immutable; cells are
``int``/``float`` for number columns, ``str`` otherwise, or ``None``.
"""

from __future__ import annotations

import csv
import re
import sqlite3
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

Cell = Optional[object]  # int | float | str | None

NUMBER = "number"
TEXT = "text"
DATE = "date"

_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}( \d{2}:\d{2}:\d{2})?$")
_NUMBER_RE = re.compile(r"^-?\d+(\.\d+)?([eE][+-]?\d+)?$")


class IoError(Exception):
    pass


class FormatError(Exception):
    def __init__(self, message: str, row: int, column: str):
        super().__init__(f"{message} (row {row}, column {column!r})")
        self.row = row
        self.column = column


@dataclass(frozen=True)
class TableSchema:
    name: str
    columns: tuple[tuple[str, str], ...]  # (name, column type)

    def __post_init__(self) -> None:
        names = [c for c, _ in self.columns]
        if len(set(n.lower() for n in names)) != len(names):
            raise ValueError(f"duplicate column names in table {self.name!r}")

    def column_type(self, name: str) -> Optional[str]:
        bare = name.split(".")[-1].lower()
        for col, ctype in self.columns:
            if col.lower() == bare:
                return ctype
        return None

    def column_name(self, name: str) -> Optional[str]:
        bare = name.split(".")[-1].lower()
        for col, _ in self.columns:
            if col.lower() == bare:
                return col
        return None


@dataclass(frozen=True)
class Table:
    schema: TableSchema
    rows: tuple[tuple[Cell, ...], ...]

    def column_values(self, name: str) -> list[Cell]:
        idx = self.column_index(name)
        return [row[idx] for row in self.rows]

    def column_index(self, name: str) -> int:
        bare = name.split(".")[-1].lower()
        for i, (col, _) in enumerate(self.schema.columns):
            if col.lower() == bare:
                return i
        raise KeyError(name)


@dataclass(frozen=True)
class Database:
    tables: tuple[Table, ...]

    def table(self, name: str) -> Optional[Table]:
        for t in self.tables:
            if t.schema.name.lower() == name.lower():
                return t
        return None

    def schema_dict(self) -> dict[str, dict[str, str]]:
        """Schema in the shape the validator consumes."""
        return {t.schema.name: dict(t.schema.columns) for t in self.tables}


def _is_date(text: str) -> bool:
    return bool(_DATE_RE.match(text))


def _is_number(text: str) -> bool:
    return bool(_NUMBER_RE.match(text))


def _infer_column_type(values: Sequence[str]) -> str:
    non_empty = [v for v in values if v != ""]
    if non_empty and all(_is_number(v) for v in non_empty):
        return NUMBER
    if non_empty and all(_is_date(v) for v in non_empty):
        return DATE
    return TEXT


def _coerce(raw: str, ctype: str, row: int, column: str) -> Cell:
    if raw == "":
        return None
    if ctype == NUMBER:
        if not _is_number(raw):
            raise FormatError(f"cell {raw!r} is not a number", row, column)
        value = float(raw)
        return int(value) if value.is_integer() and "." not in raw and "e" not in raw.lower() else value
    return raw


def _load_csv_table(path: Path) -> Table:
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise IoError(f"{path}: missing header row") from None
        raw_rows = [row for row in reader]

    for i, row in enumerate(raw_rows):
        if len(row) != len(header):
            raise FormatError("row width differs from header", i + 1, path.stem)

    columns = []
    for j, name in enumerate(header):
        ctype = _infer_column_type([row[j] for row in raw_rows])
        columns.append((name, ctype))
    schema = TableSchema(path.stem, tuple(columns))
    rows = tuple(
        tuple(_coerce(row[j], columns[j][1], i + 1, columns[j][0]) for j in range(len(columns)))
        for i, row in enumerate(raw_rows)
    )
    return Table(schema, rows)


def _load_sqlite(path: Path) -> Database:
    conn = sqlite3.connect(f"file:{path}?mode=ro", uri=True)
    conn.text_factory = lambda b: b.decode("utf-8", "replace")
    try:
        names = [
            r[0] for r in conn.execute(
                "SELECT name FROM sqlite_master WHERE type='table' "
                "AND name NOT LIKE 'sqlite_%' ORDER BY rowid"
            )
        ]
        tables = []
        for name in names:
            info = conn.execute(f'PRAGMA table_info("{name}")').fetchall()
            raw_rows = conn.execute(f'SELECT * FROM "{name}"').fetchall()
            columns = []
            for idx, (_, col, decl, *_rest) in enumerate(info):
                decl = (decl or "").upper()
                if any(k in decl for k in ("INT", "REAL", "NUMERIC", "FLOA", "DOUB", "DECIMAL")):
                    ctype = NUMBER
                else:
                    ctype = TEXT
                values = [r[idx] for r in raw_rows if r[idx] is not None]
                if ctype == NUMBER and values and not all(isinstance(v, (int, float)) for v in values):
                    ctype = TEXT
                if ctype == TEXT and values and all(isinstance(v, str) and _is_date(v) for v in values):
                    ctype = DATE
                columns.append((col, ctype))
            rows = tuple(
                tuple(None if v is None else (v if columns[j][1] == NUMBER and isinstance(v, (int, float)) else str(v))
                      for j, v in enumerate(r))
                for r in raw_rows
            )
            tables.append(Table(TableSchema(name, tuple(columns)), rows))
    finally:
        conn.close()
    return Database(tuple(tables))


def load_database(source: str | Path) -> Database:
    """Load a database from a SQLite file or a directory of CSV files."""
    path = Path(source)
    if not path.exists():
        raise IoError(f"no such database source: {path}")
    if path.is_dir():
        csv_files = sorted(path.glob("*.csv"))
        if not csv_files:
            raise IoError(f"no CSV files in {path}")
        return Database(tuple(_load_csv_table(p) for p in csv_files))
    return _load_sqlite(path)


def describe_schema(db: Database) -> str:
    """Render the ``Table name(col:type, ...)`` description, one line per table."""
    lines = []
    for table in db.tables:
        cols = ", ".join(f"{name}:{ctype}" for name, ctype in table.schema.columns)
        lines.append(f"Table {table.schema.name}({cols})")
    return "\n".join(lines)


@dataclass
class ValueSampleSet:
    """Up to k distinct example values per relevant column, first-occurrence order."""

    samples: dict[str, list[Cell]] = field(default_factory=dict)  # "table.column" -> values

    def describe(self) -> str:
        lines = []
        for key, values in self.samples.items():
            rendered = ", ".join(repr(v) if isinstance(v, str) else str(v) for v in values)
            lines.append(f"{key}: {rendered}")
        return "\n".join(lines)


_TOKEN_SPLIT = re.compile(r"[^a-z0-9]+")


def _normalize_tokens(text: str) -> set[str]:
    return {t for t in _TOKEN_SPLIT.split(text.lower()) if len(t) >= 3}


def _distinct_head(values: Sequence[Cell], k: int) -> list[Cell]:
    seen: list[Cell] = []
    for v in values:
        if v is None or v in seen:
            continue
        seen.append(v)
        if len(seen) == k:
            break
    return seen


def sample_values(db: Database, nl_query: str, client=None, k: int = 5) -> ValueSampleSet:
    """Pick query-relevant columns and sample up to k distinct values from each.

    With a model client, the client picks the relevant columns (prompted with
    the query and schema). The deterministic fallback selects columns whose
    name or any cell value shares a normalized token with the query.
    """
    relevant: list[tuple[Table, str]] = []
    if client is not None:
        relevant = _client_relevant_columns(db, nl_query, client)
    else:
        query_tokens = _normalize_tokens(nl_query)
        for table in db.tables:
            for col, _ in table.schema.columns:
                values = table.column_values(col)
                col_tokens = _normalize_tokens(col)
                hit = bool(col_tokens & query_tokens)
                if not hit:
                    for v in values:
                        if isinstance(v, str) and (_normalize_tokens(v) & query_tokens):
                            hit = True
                            break
                if hit:
                    relevant.append((table, col))

    result = ValueSampleSet()
    for table, col in relevant:
        values = _distinct_head(table.column_values(col), k)
        if values:
            result.samples[f"{table.schema.name}.{col}"] = values
    return result


def _client_relevant_columns(db: Database, nl_query: str, client) -> list:
    from .backend import chat  # local import: datastore has no hard backend dependency

    prompt = (
        "Given a database schema and an analysis query, list the columns whose "
        "values are relevant to answering the query, one per line as "
        "table.column. Output only the list.\n\n"
        f"{describe_schema(db)}\n\nQuery: {nl_query}"
    )
    text = chat(client, [("user", prompt)])
    relevant = []
    for line in text.splitlines():
        name = line.strip().strip("-* ")
        if "." not in name:
            continue
        tbl_name, col = name.split(".", 1)
        table = db.table(tbl_name)
        if table is not None and table.schema.column_name(col) is not None:
            relevant.append((table, table.schema.column_name(col)))
    return relevant
