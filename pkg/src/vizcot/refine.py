"""Self-correction, manual correction, downstream regeneration, trace diffing.

A correction re-prompts one stage (with an error hint or a user preference),
then regenerates every later stage so the reasoning stays consistent. The
flagged original node is kept as an appended alternative for side-by-side
comparison. The diff over old and new traces drives dimming/highlighting in
the UI.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

from .backend import ModelClient
from .cot import (
    STAGE_ORDER, PipelineContext, ReasoningTrace, StageDecision, StageId,
    build_trace, decisions_from_trace, run_s5_validated, run_stage,
)
from .datastore import Database

SELF_CORRECTION_HINT = (
    "The decisions made in this step may contain an error. Reconsider them "
    "carefully, correct any mistake you find, and answer in the same format."
)


class UnknownNode(Exception):
    pass


@dataclass(frozen=True)
class CorrectionRequest:
    node_id: str
    mode: str  # "self" | "manual"
    preference: Optional[str] = None

    def __post_init__(self) -> None:
        if self.mode not in ("self", "manual"):
            raise ValueError(f"unknown correction mode {self.mode!r}")
        if self.mode == "manual" and not (self.preference and self.preference.strip()):
            raise ValueError("manual correction requires a non-empty preference")
        if self.mode == "self" and self.preference:
            raise ValueError("self correction takes no preference")


@dataclass
class TraceDiff:
    """Partition of slot-bearing nodes (leaves and the root) after a correction."""

    unchanged: list[str] = field(default_factory=list)
    modified: list[str] = field(default_factory=list)
    changed_slots: dict[str, list[str]] = field(default_factory=dict)
    reasoning_changed: list[str] = field(default_factory=list)
    alternatives: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "unchanged": list(self.unchanged),
            "modified": list(self.modified),
            "changed_slots": {k: list(v) for k, v in self.changed_slots.items()},
            "reasoning_changed": list(self.reasoning_changed),
            "alternatives": list(self.alternatives),
        }


def diff_traces(old: ReasoningTrace, new: ReasoningTrace) -> TraceDiff:
    """Match nodes by id; a node is modified iff any slot value differs.

    Reasoning-text-only changes are reported separately so the UI can show
    them without flagging the decision itself.
    """
    diff = TraceDiff()
    old_nodes = {n.id: n for n in old.nodes()}
    for node in new.nodes():
        peer = old_nodes.get(node.id)
        if not node.slots and node.children:
            continue  # stage nodes derive their state from their leaves
        if peer is None:
            diff.modified.append(node.id)
            diff.changed_slots[node.id] = sorted(node.slots)
            continue
        changed = sorted(s for s in node.slots if node.slots.get(s, "") != peer.slots.get(s, ""))
        if changed:
            diff.modified.append(node.id)
            diff.changed_slots[node.id] = changed
        else:
            diff.unchanged.append(node.id)
            if node.reasoning != peer.reasoning:
                diff.reasoning_changed.append(node.id)
    for node in new.nodes():
        for alt in node.alternatives:
            diff.alternatives.append(alt.id)
    return diff


def _stage_of_node(trace: ReasoningTrace, node_id: str) -> StageId:
    node = trace.node(node_id)
    if node is None:
        raise UnknownNode(f"no node {node_id!r} in trace")
    stage_name = node_id.split("/")[0]
    if stage_name == "S5":
        raise UnknownNode("corrections target S1-S4 nodes, not the synthesis root")
    return StageId(stage_name)


def _trace_context_text(trace: ReasoningTrace) -> str:
    lines = ["Current reasoning trace:"]
    for decision in decisions_from_trace(trace):
        lines.append(f"{decision.stage.value}:")
        lines.append(decision.block())
    return "\n".join(lines)


def _correct(trace: ReasoningTrace, node_id: str, db: Database, client: ModelClient,
             stage_extra: str) -> tuple[ReasoningTrace, TraceDiff]:
    stage = _stage_of_node(trace, node_id)
    ctx = PipelineContext.build(trace.nl_query, db)
    old_decisions = decisions_from_trace(trace)
    k = STAGE_ORDER.index(stage)

    prior = old_decisions[:k]
    original = old_decisions[k]
    extra = [
        _trace_context_text(trace),
        f"Original output of this step:\n{original.block()}\n{original.reasoning}",
        stage_extra,
    ]
    new_decisions = list(prior)
    new_decisions.append(run_stage(ctx, stage, prior, client, extra))
    for later in STAGE_ORDER[k + 1: 4]:
        new_decisions.append(run_stage(ctx, later, new_decisions, client))
    new_decisions.append(run_s5_validated(ctx, new_decisions, client, db))

    new_trace = build_trace(trace.nl_query, new_decisions, status="regenerated")
    # stages strictly before the corrected one keep their original nodes
    for i in range(k):
        new_trace.root.children[i] = copy.deepcopy(trace.root.children[i])
    # keep the flagged original node for side-by-side comparison
    flagged_new = new_trace.node(node_id)
    flagged_old = trace.node(node_id)
    if flagged_new is not None and flagged_old is not None:
        alternative = copy.deepcopy(flagged_old)
        alternative.children = []
        alternative.alternatives = []
        alternative.id = f"{node_id}#alt"
        alternative.status = "alternative"
        flagged_new.alternatives.append(alternative)
    return new_trace, diff_traces(trace, new_trace)


def self_correct(trace: ReasoningTrace, node_id: str, db: Database,
                 client: ModelClient) -> tuple[ReasoningTrace, TraceDiff]:
    """Re-prompt the flagged stage with an error hint, then regenerate downstream."""
    return _correct(trace, node_id, db, client, SELF_CORRECTION_HINT)


def manual_correct(trace: ReasoningTrace, node_id: str, preference: str,
                   db: Database, client: ModelClient) -> tuple[ReasoningTrace, TraceDiff]:
    """Inject a user preference into the flagged stage, then regenerate downstream."""
    if not preference or not preference.strip():
        raise ValueError("manual correction requires a non-empty preference")
    hint = (
        "The user provided this preference for the current step; follow it:\n"
        f"{preference.strip()}"
    )
    return _correct(trace, node_id, db, client, hint)


def promote_alternative(trace: ReasoningTrace, alternative_id: str) -> ReasoningTrace:
    """Swap an appended alternative back into place, discarding the other branch."""
    base_id = alternative_id.split("#")[0]
    node = trace.node(base_id)
    if node is None:
        raise UnknownNode(f"no node {base_id!r} in trace")
    for alt in node.alternatives:
        if alt.id == alternative_id:
            promoted = copy.deepcopy(trace)
            target = promoted.node(base_id)
            assert target is not None
            target.slots = dict(alt.slots)
            target.summary = alt.summary
            target.reasoning = alt.reasoning
            target.status = alt.status if alt.status != "alternative" else "original"
            target.alternatives = []
            return promoted
    raise UnknownNode(f"no alternative {alternative_id!r} under {base_id!r}")
