"""Training-corpus construction: filtering, consistency screening, groundtruth
decomposition, reasoning synthesis, and dataset emission.

Each finished record pairs one source sample with its database description,
value samples, constraint block, and five synthesized stage reasoning texts.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import vql
from .backend import ModelClient, chat
from .cot import (
    STAGE_ORDER, STAGE_SLOTS, STAGE_TITLES, ConstraintBlock, ExtractionError,
    StageId, _first_sentence, assemble_query, default_constraints,
    slots_from_query,
)
from .datastore import Database, describe_schema, sample_values
from .vql import ParseError, VqlQuery


@dataclass(frozen=True)
class RawSample:
    id: str
    db_ref: str
    nl_query: str
    gold_vql: str


@dataclass
class TrainingRecord:
    id: str
    db_ref: str
    nl_query: str
    gold_vql: str
    schema_description: str
    value_samples: str
    constraints: str
    reasoning: dict[str, str]           # stage -> justification text
    slots: dict[str, dict[str, str]]    # stage -> slot values
    gold_canonical: str

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "db_ref": self.db_ref,
            "nl_query": self.nl_query,
            "gold_vql": self.gold_vql,
            "schema_description": self.schema_description,
            "value_samples": self.value_samples,
            "constraints": self.constraints,
            "reasoning": dict(self.reasoning),
            "slots": {k: dict(v) for k, v in self.slots.items()},
            "gold_canonical": self.gold_canonical,
        }


@dataclass
class FilterReport:
    duplicates: list[str] = field(default_factory=list)
    illegal: list[str] = field(default_factory=list)
    empty: list[str] = field(default_factory=list)
    inconsistent: list[str] = field(default_factory=list)

    def removed(self) -> int:
        return len(self.duplicates) + len(self.illegal) + len(self.empty) + len(self.inconsistent)

    def to_json(self) -> dict:
        return {
            "duplicates": {"count": len(self.duplicates), "ids": list(self.duplicates)},
            "illegal": {"count": len(self.illegal), "ids": list(self.illegal)},
            "empty": {"count": len(self.empty), "ids": list(self.empty)},
            "inconsistent": {"count": len(self.inconsistent), "ids": list(self.inconsistent)},
        }


def _normalize_query_text(text: str) -> str:
    return " ".join(text.lower().split())


def filter_corpus(samples: Sequence[RawSample],
                  schema_resolver: Optional[Callable[[str], dict]] = None,
                  ) -> tuple[list[RawSample], FilterReport]:
    """Rule-based filtering: empty VQLs, illegal VQLs, then exact duplicates.

    A duplicate is an exact match on (normalized query text, canonical VQL)
    beyond the first occurrence. With a ``schema_resolver``, samples whose VQL
    fails schema validation also count as illegal.
    """
    report = FilterReport()
    kept: list[RawSample] = []
    seen: set[tuple[str, str]] = set()
    for sample in samples:
        if not sample.gold_vql.strip():
            report.empty.append(sample.id)
            continue
        try:
            query = vql.parse_vql(sample.gold_vql)
        except ParseError:
            report.illegal.append(sample.id)
            continue
        if schema_resolver is not None:
            schema = schema_resolver(sample.db_ref)
            if not vql.validate(query, schema).ok:
                report.illegal.append(sample.id)
                continue
        key = (_normalize_query_text(sample.nl_query), vql.canonicalize(query))
        if key in seen:
            report.duplicates.append(sample.id)
            continue
        seen.add(key)
        kept.append(sample)
    return kept, report


_VERDICT_RE = re.compile(r"^\s*verdict\s*:\s*(consistent|inconsistent)\s*$",
                         re.IGNORECASE | re.MULTILINE)


def screen_consistency(sample: RawSample, db: Database,
                       client: ModelClient) -> tuple[str, str]:
    """Ask the judge whether the gold VQL fulfills the query; returns
    (verdict, rationale) with verdict in {"consistent", "inconsistent"}."""
    query = vql.parse_vql(sample.gold_vql)
    slots = slots_from_query(query)
    clause_lines = []
    for stage in STAGE_ORDER[:4]:
        for slot, value in slots[stage].items():
            clause_lines.append(f"{slot}: {value or '(none)'}")
    prompt = (
        "Judge whether the visualization query below fulfills the user's "
        "request, given the database schema. Answer with a line "
        "'verdict: consistent' or 'verdict: inconsistent', then a short "
        "rationale.\n\n"
        f"Database schema:\n{describe_schema(db)}\n\n"
        f"User request: {sample.nl_query}\n\n"
        "Parsed visualization query:\n" + "\n".join(clause_lines)
    )
    text = chat(client, [("user", prompt)])
    m = _VERDICT_RE.search(text)
    if m is None:
        raise ExtractionError("judge output has no verdict line", text)
    verdict = m.group(1).lower()
    rationale = _VERDICT_RE.sub("", text).strip()
    return verdict, rationale


def decompose_vql(gold: VqlQuery) -> dict[StageId, dict[str, str]]:
    """Split a groundtruth query into the five per-stage slot sets.

    Lossless: reassembling S1-S4 reproduces the canonical gold VQL. The S5
    slot carries the canonical full statement.
    """
    slots = slots_from_query(gold)
    slots[StageId.S5] = {"vql": vql.canonicalize(gold)}
    return slots


def reassemble(slots: dict[StageId, dict[str, str]]) -> VqlQuery:
    return assemble_query(slots)


def synthesize_reasoning(sample: RawSample, slots: dict[StageId, dict[str, str]],
                         db: Database, client: ModelClient,
                         constraints: Optional[ConstraintBlock] = None,
                         k_samples: int = 5) -> TrainingRecord:
    """Generate per-stage justification prose for the given groundtruth slots.

    The slots are teacher-forced: only the reasoning text comes from the
    client, so the record always reassembles to the gold canonical form.
    """
    constraints = constraints or default_constraints()
    schema_desc = describe_schema(db)
    samples = sample_values(db, sample.nl_query, k=k_samples)
    reasoning: dict[str, str] = {}
    for stage in STAGE_ORDER:
        decided = "\n".join(
            f"{slot}: {slots[stage].get(slot, '') or '(none)'}" for slot in STAGE_SLOTS[stage]
        )
        prompt_parts = [
            constraints.text,
            "",
            "Database schema:",
            schema_desc,
        ]
        sample_text = samples.describe()
        if sample_text:
            prompt_parts += ["", "Example column values:", sample_text]
        prompt_parts += [
            "",
            f"User query: {sample.nl_query}",
            "",
            f"Stage {stage.value} - {STAGE_TITLES[stage]}. The correct decisions "
            "for this stage are fixed below. Write a short justification for "
            "why these decisions fulfill the user's request. Output prose only.",
            decided,
        ]
        reasoning[stage.value] = chat(client, [("user", "\n".join(prompt_parts))]).strip()
    gold_query = vql.parse_vql(sample.gold_vql)
    return TrainingRecord(
        id=sample.id,
        db_ref=sample.db_ref,
        nl_query=sample.nl_query,
        gold_vql=sample.gold_vql,
        schema_description=schema_desc,
        value_samples=samples.describe(),
        constraints=constraints.text,
        reasoning=reasoning,
        slots={stage.value: dict(slots[stage]) for stage in STAGE_ORDER},
        gold_canonical=vql.canonicalize(gold_query),
    )


def emit_dataset(records: Sequence[TrainingRecord], path: str | Path) -> None:
    """One JSON object per line, stable field order."""
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")


def quality_sample(records: Sequence[TrainingRecord], rate: float,
                   seed: int = 0) -> list[TrainingRecord]:
    """Seeded random audit subset of round(rate * N) records."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must be within [0, 1]")
    n = round(rate * len(records))
    rng = random.Random(seed)
    picked = rng.sample(range(len(records)), n)
    return [records[i] for i in sorted(picked)]


def load_samples(path: str | Path) -> list[RawSample]:
    """Read raw samples from a JSONL file with id/db_ref/nl_query/gold_vql fields."""
    samples = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            samples.append(RawSample(
                id=str(obj["id"]), db_ref=obj.get("db_ref", obj.get("db", "")),
                nl_query=obj.get("nl_query", obj.get("question", "")),
                gold_vql=obj.get("gold_vql", obj.get("vql", "")),
            ))
    return samples
