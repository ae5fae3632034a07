"""Command-line interface: corpus construction, evaluation, single-query runs,
and the HTTP service."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import corpus as corpus_mod
from . import metrics as metrics_mod
from . import render, vql
from .backend import client_from_spec
from .chartspec import chart_json, emit_chart
from .cot import run_pipeline
from .executor import execute
from .server import resolve_database


@click.group()
def main() -> None:
    """Natural-language to visualization with an inspectable reasoning trace."""


@main.group()
def corpus() -> None:
    """Build and filter the reasoning-augmented training corpus."""


@corpus.command("filter")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--db-root", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--report", "report_path", required=True, type=click.Path())
def corpus_filter(input_path: str, db_root: str | None, report_path: str) -> None:
    """Rule-based filtering of raw samples; writes the removal report as JSON."""
    samples = corpus_mod.load_samples(input_path)
    resolver = None
    if db_root is not None:
        root = Path(db_root)
        cache: dict[str, dict] = {}

        def resolver(ref: str) -> dict:
            if ref not in cache:
                cache[ref] = resolve_database(root, ref).schema_dict()
            return cache[ref]

    kept, report = corpus_mod.filter_corpus(samples, resolver)
    payload = {"input": len(samples), "kept": len(kept), **report.to_json()}
    Path(report_path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    click.echo(f"kept {len(kept)} of {len(samples)} samples "
               f"(duplicates={len(report.duplicates)}, illegal={len(report.illegal)}, "
               f"empty={len(report.empty)})")


@corpus.command("build")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--db-root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--backend", "backend_spec", required=True,
              help="scripted:<fixture.json> or http:<url>#<model>")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--sample-rate", type=float, default=0.15, show_default=True,
              help="audit-subset rate; the subset ids go to <out>.audit.json")
@click.option("--screen/--no-screen", default=False,
              help="run model-based query/VQL consistency screening")
def corpus_build(input_path: str, db_root: str, out_path: str, backend_spec: str,
                 seed: int, sample_rate: float, screen: bool) -> None:
    """Filter, decompose, synthesize reasoning, and emit the JSONL dataset."""
    client = client_from_spec(backend_spec)
    root = Path(db_root)
    samples = corpus_mod.load_samples(input_path)
    db_cache: dict = {}

    def get_db(ref: str):
        if ref not in db_cache:
            db_cache[ref] = resolve_database(root, ref)
        return db_cache[ref]

    kept, report = corpus_mod.filter_corpus(samples, lambda ref: get_db(ref).schema_dict())
    if screen:
        consistent = []
        for sample in kept:
            verdict, _ = corpus_mod.screen_consistency(sample, get_db(sample.db_ref), client)
            if verdict == "consistent":
                consistent.append(sample)
            else:
                report.inconsistent.append(sample.id)
        kept = consistent

    records = []
    for sample in kept:
        slots = corpus_mod.decompose_vql(vql.parse_vql(sample.gold_vql))
        records.append(corpus_mod.synthesize_reasoning(sample, slots, get_db(sample.db_ref), client))
    corpus_mod.emit_dataset(records, out_path)

    audit = corpus_mod.quality_sample(records, sample_rate, seed=seed)
    audit_path = Path(out_path).with_suffix(Path(out_path).suffix + ".audit.json")
    audit_path.write_text(
        json.dumps({"rate": sample_rate, "seed": seed, "ids": [r.id for r in audit]},
                   indent=2) + "\n",
        encoding="utf-8")
    click.echo(f"wrote {len(records)} records to {out_path} "
               f"(audit subset: {len(audit)} ids in {audit_path})")


@main.command("eval")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--db-root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--figure", "figure_path", type=click.Path(), default=None,
              help="also render the metric rates as a PNG figure")
@click.option("--breakdown", "breakdown_path", type=click.Path(), default=None,
              help="also write the per-pair booleans as CSV")
def eval_cmd(pred_path: str, gold_path: str, db_root: str, report_path: str,
             figure_path: str | None, breakdown_path: str | None) -> None:
    """Score predictions against gold VQLs on the five metrics."""
    def read_jsonl(path: str) -> dict[str, dict]:
        out = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    obj = json.loads(line)
                    out[str(obj["id"])] = obj
        return out

    preds = read_jsonl(pred_path)
    golds = read_jsonl(gold_path)
    pairs = []
    for pid, gold in golds.items():
        pred = preds.get(pid, {})
        pairs.append(metrics_mod.EvalPair(
            id=pid, db_ref=gold.get("db_ref", gold.get("db", "")),
            predicted=pred.get("vql", pred.get("predicted", "")),
            gold=gold.get("vql", gold.get("gold_vql", "")),
        ))
    root = Path(db_root)
    report = metrics_mod.evaluate_corpus(pairs, lambda ref: resolve_database(root, ref))
    Path(report_path).write_text(json.dumps(report.to_json(), indent=2) + "\n",
                                 encoding="utf-8")
    if figure_path:
        render.render_metric_report(report, figure_path)
    if breakdown_path:
        render.write_breakdown_csv(report, breakdown_path)
    click.echo(f"chart={report.chart_acc:.2%} axis={report.axis_acc:.2%} "
               f"sql={report.sql_acc:.2%} data={report.data_acc:.2%} "
               f"all={report.all_acc:.2%}")


@main.command("run")
@click.option("--query", "nl_query", required=True)
@click.option("--db", "db_path", required=True, type=click.Path(exists=True))
@click.option("--backend", "backend_spec", required=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def run_cmd(nl_query: str, db_path: str, backend_spec: str, out_dir: str) -> None:
    """Run one query end to end; writes trace.json, chart.json, result.csv,
    chart.png into the output directory."""
    from .datastore import load_database

    client = client_from_spec(backend_spec)
    db = load_database(db_path)
    trace, query = run_pipeline(nl_query, db, client)
    result = execute(query, db)
    spec = emit_chart(query, result)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.json").write_text(
        json.dumps(trace.to_json(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    (out / "chart.json").write_text(chart_json(spec) + "\n", encoding="utf-8")
    render.write_result_csv(result, out / "result.csv")
    render.render_result(query, result, out / "chart.png")
    click.echo(vql.canonicalize(query))


@main.command("serve")
@click.option("--data-root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--backend", "backend_spec", required=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--persist", "persist_path", type=click.Path(), default=None)
def serve_cmd(data_root: str, backend_spec: str, port: int, persist_path: str | None) -> None:
    """Start the HTTP JSON API."""
    import uvicorn

    from .server import create_app

    app = create_app(data_root, client_from_spec(backend_spec), persist_path)
    uvicorn.run(app, host="127.0.0.1", port=port)


if __name__ == "__main__":
    sys.exit(main())
