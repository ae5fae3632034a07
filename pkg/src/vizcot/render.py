"""Matplotlib rendering for the CLI report path.

The HTTP service stays headless (it exports chart-spec JSON only); these
helpers turn execution results and metric reports into figure files next to
the delimited output.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .executor import ResultTable
from .metrics import MetricReport
from .vql import ChartType, VqlQuery


def write_result_csv(result: ResultTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow([label for label, _ in result.columns])
        writer.writerows(result.rows)


def render_result(query: VqlQuery, result: ResultTable, path: str | Path) -> None:
    """Draw the executed result with the chart type the query asked for."""
    (x_label, _), (y_label, _) = result.columns
    xs = [str(x) for x, _ in result.rows]
    ys = [y if isinstance(y, (int, float)) else 0 for _, y in result.rows]

    fig, ax = plt.subplots(figsize=(8, 5))
    if query.chart is ChartType.PIE:
        ax.pie(ys, labels=xs, autopct="%1.1f%%")
        ax.set_title(f"{y_label} by {x_label}")
    else:
        if query.chart is ChartType.BAR:
            ax.bar(xs, ys)
        elif query.chart is ChartType.LINE:
            ax.plot(xs, ys, marker="o")
        else:
            ax.scatter(xs, ys)
        ax.set_xlabel(x_label)
        ax.set_ylabel(y_label)
        if len(xs) > 8:
            ax.tick_params(axis="x", rotation=60)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_metric_report(report: MetricReport, path: str | Path) -> None:
    """Bar figure of the five corpus-level accuracy rates."""
    names = ["Chart", "Axis", "SQL", "Data", "All"]
    rates = [report.chart_acc, report.axis_acc, report.sql_acc,
             report.data_acc, report.all_acc]
    fig, ax = plt.subplots(figsize=(7, 4))
    bars = ax.bar(names, rates, color="#4878cf")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    for bar, rate in zip(bars, rates):
        ax.text(bar.get_x() + bar.get_width() / 2, rate + 0.02,
                f"{rate:.1%}", ha="center", fontsize=9)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def write_breakdown_csv(report: MetricReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "chart", "axis", "sql", "data", "all"])
        for pair in report.pairs:
            writer.writerow([pair.id, pair.chart, pair.axis, pair.sql, pair.data, pair.all])
