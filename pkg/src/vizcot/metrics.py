"""The five evaluation metrics over (predicted, gold) VQL pairs.

Chart, axis, and SQL accuracy are syntax-based; data accuracy executes both
queries and compares results regardless of SQL syntax; the all-match is the
conjunction of chart, axis, and data matches.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from . import vql
from .datastore import Database
from .executor import ExecError, ResultTable, execute
from .vql import ParseError, VqlQuery

REL_TOL = 1e-6


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class EvalPair:
    id: str
    db_ref: str
    predicted: str
    gold: str


@dataclass
class PairResult:
    id: str
    chart: bool
    axis: bool
    sql: bool
    data: bool

    @property
    def all(self) -> bool:
        return self.chart and self.axis and self.data

    def to_json(self) -> dict:
        return {"id": self.id, "chart": self.chart, "axis": self.axis,
                "sql": self.sql, "data": self.data, "all": self.all}


@dataclass
class MetricReport:
    chart_acc: float
    axis_acc: float
    sql_acc: float
    data_acc: float
    all_acc: float
    pairs: list[PairResult] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "chart_acc": self.chart_acc,
            "axis_acc": self.axis_acc,
            "sql_acc": self.sql_acc,
            "data_acc": self.data_acc,
            "all_acc": self.all_acc,
            "pairs": [p.to_json() for p in self.pairs],
        }


def _try_parse(text: str) -> Optional[VqlQuery]:
    try:
        return vql.parse_vql(text)
    except ParseError:
        return None


def chart_match(pred: str, gold: str) -> bool:
    """True iff both parse and the chart types are equal."""
    p, g = _try_parse(pred), _try_parse(gold)
    return p is not None and g is not None and p.chart is g.chart


def axis_match(pred: str, gold: str) -> bool:
    """True iff the canonicalized (x, y) select pairs are equal, aggregates included."""
    p, g = _try_parse(pred), _try_parse(gold)
    if p is None or g is None:
        return False
    return (
        p.x.expression(lower=True) == g.x.expression(lower=True)
        and p.y.expression(lower=True) == g.y.expression(lower=True)
    )


def sql_match(pred: str, gold: str) -> bool:
    """True iff the canonical non-VISUALIZE portions are byte-equal."""
    p, g = _try_parse(pred), _try_parse(gold)
    if p is None or g is None:
        return False
    return vql.sql_portion(vql.canonicalize(p)) == vql.sql_portion(vql.canonicalize(g))


def _cell_key(cell):
    """Comparison key with numeric cells bucketed by relative tolerance."""
    if isinstance(cell, bool):
        return ("t", str(cell))
    if isinstance(cell, (int, float)):
        return ("n", float(cell))
    return ("t", str(cell) if cell is not None else None)


def _cells_equal(a, b) -> bool:
    ka, kb = _cell_key(a), _cell_key(b)
    if ka[0] != kb[0]:
        return False
    if ka[0] == "n":
        x, y = ka[1], kb[1]
        return abs(x - y) <= REL_TOL * max(abs(x), abs(y), 1.0)
    return ka[1] == kb[1]


def _rows_equal(a: Sequence, b: Sequence) -> bool:
    return len(a) == len(b) and all(
        _cells_equal(ra[0], rb[0]) and _cells_equal(ra[1], rb[1]) for ra, rb in zip(a, b)
    )


def _multiset_equal(a: list, b: list) -> bool:
    if len(a) != len(b):
        return False
    remaining = list(b)
    for row in a:
        for i, cand in enumerate(remaining):
            if _cells_equal(row[0], cand[0]) and _cells_equal(row[1], cand[1]):
                del remaining[i]
                break
        else:
            return False
    return True


def results_match(pred: ResultTable, gold: ResultTable, gold_ordered: bool) -> bool:
    if gold_ordered:
        return _rows_equal(pred.rows, gold.rows)
    return _multiset_equal(pred.rows, gold.rows)


def data_match(pred: str, gold: str, db: Database) -> bool:
    """Execute both queries and compare results regardless of SQL syntax.

    Row multisets are compared when the gold query has no ORDER BY, ordered
    sequences when it does. Any parse or execution error on the prediction
    scores false.
    """
    p, g = _try_parse(pred), _try_parse(gold)
    if g is None:
        return False
    try:
        gold_result = execute(g, db)
    except ExecError:
        return False
    if p is None:
        return False
    try:
        pred_result = execute(p, db)
    except ExecError:
        return False
    return results_match(pred_result, gold_result, g.order is not None)


def evaluate_corpus(pairs: Sequence[EvalPair],
                    db_resolver: Callable[[str], Database]) -> MetricReport:
    """Per-pair booleans averaged into the five corpus-level rates."""
    if not pairs:
        raise ConfigError("cannot evaluate an empty pair list")
    results = []
    db_cache: dict[str, Database] = {}
    for pair in pairs:
        if pair.db_ref not in db_cache:
            try:
                db_cache[pair.db_ref] = db_resolver(pair.db_ref)
            except Exception as exc:
                raise ConfigError(f"cannot resolve database {pair.db_ref!r}: {exc}") from exc
        db = db_cache[pair.db_ref]
        result = PairResult(
            id=pair.id,
            chart=chart_match(pair.predicted, pair.gold),
            axis=axis_match(pair.predicted, pair.gold),
            sql=sql_match(pair.predicted, pair.gold),
            data=data_match(pair.predicted, pair.gold, db),
        )
        assert not result.all or (result.chart and result.axis and result.data)
        results.append(result)

    n = len(results)
    return MetricReport(
        chart_acc=sum(r.chart for r in results) / n,
        axis_acc=sum(r.axis for r in results) / n,
        sql_acc=sum(r.sql for r in results) / n,
        data_acc=sum(r.data for r in results) / n,
        all_acc=sum(r.all for r in results) / n,
        pairs=results,
    )
