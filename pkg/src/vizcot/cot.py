"""Five-stage reasoning pipeline from natural-language query to a final VQL.

Stages run in order: S1 picks the chart type, S2 retrieves relevant data
(FROM/SELECT/WHERE), S3 sets data granularity (GROUP BY/BIN), S4 refines for
display (ORDER BY/LIMIT), and S5 synthesizes the complete VQL. Each stage
answers with a fenced ``slot: value`` block followed by free-text reasoning,
which keeps extraction deterministic and testable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from . import vql
from .backend import Message, ModelClient, chat
from .datastore import Database, ValueSampleSet, describe_schema, sample_values
from .vql import (
    AggregateFn, BinUnit, ChartType, ParseError, SortDirection, VqlQuery,
)


class StageId(Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    S4 = "S4"
    S5 = "S5"


STAGE_ORDER = [StageId.S1, StageId.S2, StageId.S3, StageId.S4, StageId.S5]

STAGE_TITLES = {
    StageId.S1: "Determine chart type",
    StageId.S2: "Retrieve relevant data",
    StageId.S3: "Define data granularity",
    StageId.S4: "Refine data for visualization",
    StageId.S5: "Generate visualization",
}

STAGE_SLOTS: dict[StageId, tuple[str, ...]] = {
    StageId.S1: ("chart_type",),
    StageId.S2: ("from_table", "join", "select", "where"),
    StageId.S3: ("group_by", "bin"),
    StageId.S4: ("order_by", "sort_direction", "limit"),
    StageId.S5: ("vql",),
}

# how slots group into tree leaves under each stage node
STAGE_LEAVES: dict[StageId, tuple[tuple[str, tuple[str, ...]], ...]] = {
    StageId.S1: (("CHART_TYPE", ("chart_type",)),),
    StageId.S2: (
        ("FROM", ("from_table",)),
        ("JOIN", ("join",)),
        ("SELECT", ("select",)),
        ("WHERE", ("where",)),
    ),
    StageId.S3: (("GROUP_BY", ("group_by",)), ("BIN_BY", ("bin",))),
    StageId.S4: (("SORT_DIRECTION", ("order_by", "sort_direction")), ("LIMIT", ("limit",))),
    StageId.S5: (),
}

_STAGE_INSTRUCTIONS = {
    StageId.S1: (
        "Step S1 - Determine chart type. Select the most appropriate chart type "
        "for this analysis and justify why it communicates the requested insight."
    ),
    StageId.S2: (
        "Step S2 - Retrieve relevant data. Identify the necessary table, an "
        "optional join, the two selected columns (x then y, aggregates allowed), "
        "and any filter condition. Justify each decision."
    ),
    StageId.S3: (
        "Step S3 - Define data granularity. Decide how to group the data: "
        "GROUP BY columns for categorical grouping, or BIN for time-based data. "
        "Explain the grouping strategy."
    ),
    StageId.S4: (
        "Step S4 - Refine data for visualization. Decide on sorting and limiting "
        "(ORDER BY key, sort direction, LIMIT). Explain why the refinement helps "
        "readability, or why it is unnecessary."
    ),
    StageId.S5: (
        "Step S5 - Generate visualization. Synthesize all previous decisions "
        "into one complete VQL statement."
    ),
}


class ExtractionError(Exception):
    """Stage output could not be parsed; carries the raw text for retry."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class PipelineError(Exception):
    def __init__(self, stage: StageId, cause: Exception):
        super().__init__(f"pipeline failed at {stage.value}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class ConstraintBlock:
    """Prompt text enumerating the closed sets the model must respect."""

    text: str


def default_constraints() -> ConstraintBlock:
    charts = ", ".join(c.value for c in ChartType)
    aggs = ", ".join(a.value for a in AggregateFn)
    units = ", ".join(u.value for u in BinUnit)
    return ConstraintBlock(
        "Constraints:\n"
        f"- Chart type must be one of: {charts}. No other chart type is legal.\n"
        f"- Aggregate functions are limited to: {aggs}.\n"
        "- Column selections are restricted to columns present in the database "
        "schema, or valid aggregate derivations over them.\n"
        f"- BIN units are limited to: {units}. Function-style date expressions "
        "are illegal; use the BIN ... BY ... clause."
    )


@dataclass
class StageDecision:
    stage: StageId
    fields: dict[str, str]
    reasoning: str
    summary: str

    def block(self) -> str:
        lines = [f"{slot}: {self.fields.get(slot, '')}" for slot in STAGE_SLOTS[self.stage]]
        return "\n".join(lines)


@dataclass
class TraceNode:
    id: str
    label: str
    summary: str
    reasoning: str
    slots: dict[str, str] = field(default_factory=dict)
    status: str = "original"
    children: list["TraceNode"] = field(default_factory=list)
    alternatives: list["TraceNode"] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "summary": self.summary,
            "reasoning": self.reasoning,
            "slots": dict(self.slots),
            "status": self.status,
            "children": [c.to_json() for c in self.children],
            "alternatives": [a.to_json() for a in self.alternatives],
        }

    @staticmethod
    def from_json(data: dict) -> "TraceNode":
        return TraceNode(
            id=data["id"], label=data["label"], summary=data["summary"],
            reasoning=data["reasoning"], slots=dict(data["slots"]),
            status=data["status"],
            children=[TraceNode.from_json(c) for c in data["children"]],
            alternatives=[TraceNode.from_json(a) for a in data["alternatives"]],
        )


@dataclass
class ReasoningTrace:
    """Hierarchical reasoning tree; the root is the final synthesis (S5)."""

    nl_query: str
    root: TraceNode
    divergences: list[str] = field(default_factory=list)

    def nodes(self) -> list[TraceNode]:
        out: list[TraceNode] = []

        def walk(node: TraceNode) -> None:
            out.append(node)
            for c in node.children:
                walk(c)
        walk(self.root)
        return out

    def node(self, node_id: str) -> Optional[TraceNode]:
        for n in self.nodes():
            if n.id == node_id:
                return n
        return None

    def final_vql(self) -> str:
        return self.root.slots.get("vql", "")

    def to_json(self) -> dict:
        return {
            "nl_query": self.nl_query,
            "root": self.root.to_json(),
            "divergences": list(self.divergences),
        }

    @staticmethod
    def from_json(data: dict) -> "ReasoningTrace":
        return ReasoningTrace(
            nl_query=data["nl_query"],
            root=TraceNode.from_json(data["root"]),
            divergences=list(data["divergences"]),
        )


# ---------------------------------------------------------------------------
# Prompt construction

def build_prompt(stage: StageId, nl_query: str, schema_desc: str,
                 samples: ValueSampleSet, constraints: ConstraintBlock,
                 prior: Sequence[StageDecision],
                 extra: Sequence[str] = ()) -> list[Message]:
    """Assemble the message list for one stage.

    The user message carries, in order: the schema description, value samples,
    the query, all prior stage decisions, and the stage instruction. ``extra``
    appends stage-specific context (correction hints, validation feedback).
    """
    expected = STAGE_ORDER[: STAGE_ORDER.index(stage)]
    if [d.stage for d in prior] != expected:
        raise ValueError(f"prior decisions must be exactly {[s.value for s in expected]}")

    sections = ["Database schema:", schema_desc]
    sample_text = samples.describe()
    if sample_text:
        sections += ["", "Example column values:", sample_text]
    sections += ["", f"User query: {nl_query}"]
    for decision in prior:
        sections += [
            "",
            f"Decided in {decision.stage.value} ({STAGE_TITLES[decision.stage]}):",
            decision.block(),
        ]
    sections += ["", _STAGE_INSTRUCTIONS[stage]]
    slot_lines = "\n".join(f"{slot}: <value or empty>" for slot in STAGE_SLOTS[stage])
    sections += [
        "",
        "Answer with a fenced block containing exactly these lines, then your "
        "reasoning as free text:",
        f"```\n{slot_lines}\n```",
    ]
    for item in extra:
        sections += ["", item]
    return [("system", constraints.text), ("user", "\n".join(sections))]


# ---------------------------------------------------------------------------
# Stage-output parsing

_FENCE_RE = re.compile(r"```[a-zA-Z]*\n(.*?)```", re.DOTALL)
_EMPTY_VALUES = {"", "none", "null", "n/a", "-"}


def _first_sentence(text: str, limit: int = 140) -> str:
    text = " ".join(text.split())
    m = re.search(r"[.!?](\s|$)", text)
    sentence = text[: m.end()].strip() if m else text
    return sentence[:limit]


def _check_slot(slot: str, value: str) -> None:
    if value == "":
        return
    try:
        if slot == "chart_type":
            ChartType(value.upper())
        elif slot == "from_table":
            vql._Parser(value).expect_identifier("table name")
        elif slot == "join":
            p = vql._Parser(value)
            p.expect_identifier("table name")
            p.expect_keyword("ON")
            p.expect_identifier("column name")
            p.expect_symbol("=")
            p.expect_identifier("column name")
        elif slot == "select":
            p = vql._Parser(value)
            p.parse_select_item()
            p.expect_symbol(",")
            p.parse_select_item()
        elif slot == "where":
            vql._Parser(value).parse_predicate()
        elif slot == "group_by":
            p = vql._Parser(value)
            p.expect_identifier("column name")
            while p.accept_symbol(","):
                p.expect_identifier("column name")
        elif slot == "bin":
            p = vql._Parser(value)
            p.expect_identifier("column name")
            p.expect_keyword("BY")
            BinUnit(p.expect_identifier("bin unit").upper())
        elif slot == "order_by":
            vql._Parser(value).parse_select_item()
        elif slot == "sort_direction":
            SortDirection(value.upper())
        elif slot == "limit":
            if int(value) < 1:
                raise ValueError("limit must be >= 1")
        elif slot == "vql":
            vql.parse_vql(value)
    except (ParseError, ValueError) as exc:
        raise ExtractionError(f"unparseable slot value {slot}={value!r}: {exc}") from exc


def parse_stage_output(stage: StageId, text: str) -> StageDecision:
    """Extract the slot block and reasoning from a stage's model output."""
    m = _FENCE_RE.search(text)
    if m is None:
        raise ExtractionError("missing fenced slot block", text)
    fields: dict[str, str] = {}
    for line in m.group(1).splitlines():
        if ":" not in line:
            continue
        name, _, value = line.partition(":")
        fields[name.strip().lower()] = value.strip()
    decision_fields: dict[str, str] = {}
    for slot in STAGE_SLOTS[stage]:
        if slot not in fields:
            raise ExtractionError(f"missing slot {slot!r}", text)
        value = fields[slot]
        if value.lower() in _EMPTY_VALUES:
            value = ""
        _check_slot(slot, value)
        decision_fields[slot] = value
    reasoning = (text[: m.start()] + text[m.end():]).strip()
    return StageDecision(
        stage=stage, fields=decision_fields, reasoning=reasoning,
        summary=_first_sentence(reasoning),
    )


# ---------------------------------------------------------------------------
# Slot <-> query conversion

def slots_from_query(query: VqlQuery) -> dict[StageId, dict[str, str]]:
    """Decompose a parsed query into per-stage slot values (lossless)."""
    join = ""
    if query.join is not None:
        join = f"{query.join.table} ON {query.join.left_column} = {query.join.right_column}"
    where = vql._render_predicate(query.where, lower=False, canonical=False) if query.where else ""
    return {
        StageId.S1: {"chart_type": query.chart.value},
        StageId.S2: {
            "from_table": query.from_table,
            "join": join,
            "select": f"{query.x.expression()}, {query.y.expression()}",
            "where": where,
        },
        StageId.S3: {
            "group_by": ", ".join(query.group_by) if query.group_by else "",
            "bin": f"{query.bin.column} BY {query.bin.unit.value}" if query.bin else "",
        },
        StageId.S4: {
            "order_by": query.order.key.expression() if query.order else "",
            "sort_direction": query.order.direction.value if query.order else "",
            "limit": str(query.limit) if query.limit is not None else "",
        },
        StageId.S5: {"vql": vql.render_vql(query)},
    }


def assemble_query(slots: dict[StageId, dict[str, str]]) -> VqlQuery:
    """Rebuild a query from S1-S4 slot values; inverse of slots_from_query."""
    s1, s2 = slots[StageId.S1], slots[StageId.S2]
    s3, s4 = slots[StageId.S3], slots[StageId.S4]
    parts = ["VISUALIZE", s1["chart_type"], "SELECT", s2["select"], "FROM", s2["from_table"]]
    if s2.get("join"):
        parts += ["JOIN", s2["join"]]
    if s2.get("where"):
        parts += ["WHERE", s2["where"]]
    if s3.get("group_by"):
        parts += ["GROUP BY", s3["group_by"]]
    if s3.get("bin"):
        parts += ["BIN", s3["bin"]]
    if s4.get("order_by"):
        parts += ["ORDER BY", s4["order_by"], s4.get("sort_direction") or "ASC"]
    if s4.get("limit"):
        parts += ["LIMIT", s4["limit"]]
    return vql.parse_vql(" ".join(parts))


# ---------------------------------------------------------------------------
# Trace assembly

def build_trace(nl_query: str, decisions: Sequence[StageDecision],
                status: str = "original") -> ReasoningTrace:
    by_stage = {d.stage: d for d in decisions}
    s5 = by_stage[StageId.S5]
    root = TraceNode(
        id="S5", label=f"S5 {STAGE_TITLES[StageId.S5]}", summary=s5.summary,
        reasoning=s5.reasoning, slots=dict(s5.fields), status=status,
    )
    for stage in STAGE_ORDER[:4]:
        decision = by_stage[stage]
        stage_node = TraceNode(
            id=stage.value, label=f"{stage.value} {STAGE_TITLES[stage]}",
            summary=decision.summary, reasoning=decision.reasoning, status=status,
        )
        for leaf_label, slot_names in STAGE_LEAVES[stage]:
            slots = {s: decision.fields.get(s, "") for s in slot_names}
            shown = "; ".join(v for v in slots.values() if v) or "(none)"
            stage_node.children.append(TraceNode(
                id=f"{stage.value}/{leaf_label}", label=leaf_label,
                summary=f"{leaf_label}: {shown}", reasoning="", slots=slots,
                status=status,
            ))
        root.children.append(stage_node)
    trace = ReasoningTrace(nl_query=nl_query, root=root)
    _record_divergences(trace, by_stage)
    return trace


def _record_divergences(trace: ReasoningTrace, by_stage: dict[StageId, StageDecision]) -> None:
    """Surface any mismatch between the S5 VQL and the S1-S4 slot decisions."""
    try:
        final = vql.parse_vql(by_stage[StageId.S5].fields["vql"])
        staged = assemble_query({s: d.fields for s, d in by_stage.items() if s != StageId.S5})
    except (ParseError, KeyError, ExtractionError):
        return
    final_canon = vql.canonicalize(final)
    staged_canon = vql.canonicalize(staged)
    if final_canon != staged_canon:
        trace.divergences.append(
            f"S5 output ({final_canon}) diverges from the staged decisions ({staged_canon})"
        )


def decisions_from_trace(trace: ReasoningTrace) -> list[StageDecision]:
    """Recover per-stage decisions from a trace (inverse of build_trace)."""
    decisions = []
    for stage_node in trace.root.children:
        stage = StageId(stage_node.id)
        fields: dict[str, str] = {}
        for leaf in stage_node.children:
            fields.update(leaf.slots)
        decisions.append(StageDecision(
            stage=stage, fields=fields, reasoning=stage_node.reasoning,
            summary=stage_node.summary,
        ))
    decisions.append(StageDecision(
        stage=StageId.S5, fields=dict(trace.root.slots),
        reasoning=trace.root.reasoning, summary=trace.root.summary,
    ))
    return decisions


# ---------------------------------------------------------------------------
# Pipeline

@dataclass
class PipelineContext:
    """Inputs shared by every stage prompt of one run."""

    nl_query: str
    schema_desc: str
    samples: ValueSampleSet
    constraints: ConstraintBlock

    @staticmethod
    def build(nl_query: str, db: Database, k_samples: int = 5) -> "PipelineContext":
        return PipelineContext(
            nl_query=nl_query,
            schema_desc=describe_schema(db),
            samples=sample_values(db, nl_query, k=k_samples),
            constraints=default_constraints(),
        )


def run_stage(ctx: PipelineContext, stage: StageId, prior: Sequence[StageDecision],
              client: ModelClient, extra: Sequence[str] = ()) -> StageDecision:
    messages = build_prompt(stage, ctx.nl_query, ctx.schema_desc, ctx.samples,
                            ctx.constraints, prior, extra)
    text = chat(client, messages)
    try:
        return parse_stage_output(stage, text)
    except ExtractionError as exc:
        raise PipelineError(stage, exc) from exc


def run_s5_validated(ctx: PipelineContext, prior: Sequence[StageDecision],
                     client: ModelClient, db: Database,
                     extra: Sequence[str] = ()) -> StageDecision:
    """Run S5 and validate the produced VQL, retrying once with the violations."""
    decision = run_stage(ctx, StageId.S5, prior, client, extra)
    problems = _vql_problems(decision.fields["vql"], db)
    if problems:
        feedback = (
            "Your previous VQL was invalid:\n"
            + "\n".join(f"- {p}" for p in problems)
            + "\nProduce a corrected VQL."
        )
        decision = run_stage(ctx, StageId.S5, prior, client, list(extra) + [feedback])
        problems = _vql_problems(decision.fields["vql"], db)
        if problems:
            raise PipelineError(StageId.S5, ExtractionError("; ".join(problems)))
    return decision


def _vql_problems(text: str, db: Database) -> list[str]:
    try:
        query = vql.parse_vql(text)
    except ParseError as exc:
        return [str(exc)]
    report = vql.validate(query, db.schema_dict())
    return [f"{v.kind}: {v.message}" for v in report.violations]


def run_pipeline(nl_query: str, db: Database, client: ModelClient,
                 k_samples: int = 5) -> tuple[ReasoningTrace, VqlQuery]:
    """Run S1 through S5 and assemble the reasoning trace.

    The S5 VQL is parsed and validated; on validation failure S5 is retried
    once with the violation list appended to its prompt.
    """
    ctx = PipelineContext.build(nl_query, db, k_samples)
    decisions: list[StageDecision] = []
    for stage in STAGE_ORDER[:4]:
        decisions.append(run_stage(ctx, stage, decisions, client))
    decisions.append(run_s5_validated(ctx, decisions, client, db))
    trace = build_trace(nl_query, decisions)
    return trace, vql.parse_vql(trace.final_vql())
