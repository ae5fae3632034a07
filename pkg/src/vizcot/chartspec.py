"""Converts a query plus its execution result into a Vega-Lite document.

Data is inlined so exported specs are self-contained; key order is stable so
identical inputs yield byte-identical JSON.
"""

from __future__ import annotations

import json

from .datastore import DATE, NUMBER
from .executor import ResultTable
from .vql import ChartType, SortDirection, VqlQuery

VEGA_LITE_SCHEMA_URL = "https://vega.github.io/schema/vega-lite/v5.json"

_MARKS = {
    ChartType.BAR: "bar",
    ChartType.LINE: "line",
    ChartType.SCATTER: "point",
    ChartType.PIE: "arc",
}


class SpecError(Exception):
    pass


def _measure(ctype: str, binned: bool) -> str:
    if binned or ctype == DATE:
        return "temporal"
    if ctype == NUMBER:
        return "quantitative"
    return "nominal"


def emit_chart(query: VqlQuery, result: ResultTable) -> dict:
    """Build the Vega-Lite document for an executed query.

    BAR/LINE/SCATTER map to bar/line/point marks with x/y encodings; PIE maps
    to an arc mark with the category on color and the value on angular size.
    An ORDER BY in the query becomes a sort hint preserving executed order.
    """
    (x_label, x_type), (y_label, y_type) = result.columns
    if x_label != query.x.expression() or y_label != query.y.expression():
        raise SpecError(
            f"result columns ({x_label}, {y_label}) do not match query select items"
        )

    x_binned = query.bin is not None and query.x.aggregate is None \
        and query.x.column.split(".")[-1].lower() == query.bin.column.split(".")[-1].lower()
    x_measure = _measure(x_type, x_binned)
    y_measure = "quantitative" if (query.y.aggregate is not None or y_type == NUMBER) \
        else _measure(y_type, False)

    values = [{x_label: x, y_label: y} for x, y in result.rows]

    x_enc: dict = {"field": x_label, "type": x_measure}
    y_enc: dict = {"field": y_label, "type": y_measure}
    if query.order is not None:
        # null sort = keep data order, which execute() already produced
        target = x_enc if query.chart is not ChartType.PIE else None
        if target is not None:
            target["sort"] = None

    if query.chart is ChartType.PIE:
        encoding = {
            "theta": {"field": y_label, "type": "quantitative"},
            "color": {"field": x_label, "type": "nominal"},
        }
    else:
        encoding = {"x": x_enc, "y": y_enc}

    doc = {
        "$schema": VEGA_LITE_SCHEMA_URL,
        "mark": _MARKS[query.chart],
        "data": {"values": values},
        "encoding": encoding,
    }
    if query.order is not None:
        doc["usermeta"] = {
            "sortHint": {
                "field": query.order.key.expression(),
                "direction": "descending" if query.order.direction is SortDirection.DESC else "ascending",
            }
        }
    return doc


def chart_json(doc: dict) -> str:
    """Stable serialization of an emitted document."""
    return json.dumps(doc, ensure_ascii=False, indent=2)
