"""Session-oriented HTTP service over the pipeline, executor, chart emitter and
refinement engine.

Sessions live in memory; an optional append-only JSON-lines persistence file
restores them byte-identically on restart. Within a session mutations
serialize (a concurrent mutation gets 409 Busy); distinct sessions are
independent.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from . import vql
from .backend import ModelClient
from .chartspec import emit_chart
from .cot import PipelineError, ReasoningTrace, run_pipeline
from .datastore import Database, IoError, load_database
from .executor import ExecError, execute, execute_stage
from .refine import CorrectionRequest, UnknownNode, manual_correct, self_correct


@dataclass
class TraceVersion:
    number: int
    trace_json: dict
    diff_json: Optional[dict]
    chart_json: Optional[dict]
    vql_text: str


@dataclass
class Session:
    id: str
    db_ref: str
    db: Database
    created_at: float
    versions: list[TraceVersion] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def current(self) -> Optional[TraceVersion]:
        return self.versions[-1] if self.versions else None


def resolve_database(data_root: Path, selector: str) -> Database:
    candidates = [
        data_root / selector,
        data_root / f"{selector}.sqlite",
        data_root / f"{selector}.db",
    ]
    for path in candidates:
        if path.exists():
            return load_database(path)
    raise IoError(f"unknown database {selector!r} under {data_root}")


class CreateSessionBody(BaseModel):
    database: str


class QueryBody(BaseModel):
    query: str


class CorrectBody(BaseModel):
    node_id: str
    mode: str
    preference: Optional[str] = None


def create_app(data_root: str | Path, client: ModelClient,
               persist_path: str | Path | None = None) -> FastAPI:
    data_root = Path(data_root)
    app = FastAPI(title="vizcot")
    sessions: dict[str, Session] = {}
    persist_file = Path(persist_path) if persist_path else None
    persist_lock = threading.Lock()

    def persist(event: dict) -> None:
        if persist_file is None:
            return
        with persist_lock:
            with persist_file.open("a", encoding="utf-8") as f:
                f.write(json.dumps(event, ensure_ascii=False) + "\n")

    def restore() -> None:
        if persist_file is None or not persist_file.exists():
            return
        with persist_file.open(encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                event = json.loads(line)
                if event["type"] == "session":
                    sessions[event["id"]] = Session(
                        id=event["id"], db_ref=event["database"],
                        db=resolve_database(data_root, event["database"]),
                        created_at=event["created_at"],
                    )
                elif event["type"] == "version":
                    sessions[event["session"]].versions.append(TraceVersion(
                        number=event["number"], trace_json=event["trace"],
                        diff_json=event.get("diff"), chart_json=event.get("chart"),
                        vql_text=event["vql"],
                    ))

    restore()

    def get_session(session_id: str) -> Session | JSONResponse:
        session = sessions.get(session_id)
        if session is None:
            return JSONResponse({"error": f"unknown session {session_id!r}"}, status_code=404)
        return session

    def chart_for(trace: ReasoningTrace, db: Database) -> tuple[Optional[dict], Optional[dict]]:
        """(chart spec, error payload) for the trace's final VQL."""
        try:
            query = vql.parse_vql(trace.final_vql())
            result = execute(query, db)
            return emit_chart(query, result), None
        except (vql.ParseError, ExecError) as exc:
            return None, {"error": str(exc), "trace": trace.to_json()}

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "sessions": len(sessions)}

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        try:
            db = resolve_database(data_root, body.database)
        except IoError as exc:
            return JSONResponse({"error": str(exc)}, status_code=404)
        session = Session(id=uuid.uuid4().hex, db_ref=body.database, db=db,
                          created_at=time.time())
        sessions[session.id] = session
        persist({"type": "session", "id": session.id, "database": session.db_ref,
                 "created_at": session.created_at})
        return {"session_id": session.id}

    @app.post("/sessions/{session_id}/query")
    def submit_query(session_id: str, body: QueryBody):
        session = get_session(session_id)
        if isinstance(session, JSONResponse):
            return session
        if not session.lock.acquire(blocking=False):
            return JSONResponse({"error": "a run is already in flight"}, status_code=409)
        try:
            try:
                trace, _query = run_pipeline(body.query, session.db, client)
            except PipelineError as exc:
                return JSONResponse(
                    {"error": str(exc), "stage": exc.stage.value}, status_code=502)
            chart, error = chart_for(trace, session.db)
            version = TraceVersion(
                number=len(session.versions) + 1, trace_json=trace.to_json(),
                diff_json=None, chart_json=chart, vql_text=trace.final_vql(),
            )
            session.versions.append(version)
            persist({"type": "version", "session": session.id, "number": version.number,
                     "trace": version.trace_json, "diff": None, "chart": chart,
                     "vql": version.vql_text})
            if error is not None:
                return JSONResponse({**error, "version": version.number}, status_code=422)
            return {"version": version.number, "trace": version.trace_json, "chart": chart}
        finally:
            session.lock.release()

    @app.get("/sessions/{session_id}/trace")
    def get_trace(session_id: str, version: Optional[int] = None):
        session = get_session(session_id)
        if isinstance(session, JSONResponse):
            return session
        if not session.versions:
            return JSONResponse({"error": "no trace yet"}, status_code=409)
        if version is None:
            v = session.current
        else:
            matches = [x for x in session.versions if x.number == version]
            if not matches:
                return JSONResponse({"error": f"no version {version}"}, status_code=404)
            v = matches[0]
        return {"version": v.number, "trace": v.trace_json, "diff": v.diff_json,
                "chart": v.chart_json}

    @app.get("/sessions/{session_id}/steps/{node_id:path}/data")
    def step_data(session_id: str, node_id: str):
        session = get_session(session_id)
        if isinstance(session, JSONResponse):
            return session
        if session.current is None:
            return JSONResponse({"error": "no trace yet"}, status_code=409)
        trace = ReasoningTrace.from_json(session.current.trace_json)
        if trace.node(node_id) is None:
            return JSONResponse({"error": f"unknown node {node_id!r}"}, status_code=404)
        stage = node_id.split("/")[0]
        try:
            query = vql.parse_vql(trace.final_vql())
            result = execute_stage(query, session.db, stage)
        except (vql.ParseError, ExecError) as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        return result.to_json()

    @app.post("/sessions/{session_id}/correct")
    def correct(session_id: str, body: CorrectBody):
        session = get_session(session_id)
        if isinstance(session, JSONResponse):
            return session
        if session.current is None:
            return JSONResponse({"error": "no trace yet"}, status_code=409)
        try:
            request = CorrectionRequest(node_id=body.node_id, mode=body.mode,
                                        preference=body.preference)
        except ValueError as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        if not session.lock.acquire(blocking=False):
            return JSONResponse({"error": "a run is already in flight"}, status_code=409)
        try:
            trace = ReasoningTrace.from_json(session.current.trace_json)
            try:
                if request.mode == "self":
                    new_trace, diff = self_correct(trace, request.node_id, session.db, client)
                else:
                    new_trace, diff = manual_correct(trace, request.node_id,
                                                     request.preference or "",
                                                     session.db, client)
            except UnknownNode as exc:
                return JSONResponse({"error": str(exc)}, status_code=404)
            except PipelineError as exc:
                return JSONResponse(
                    {"error": str(exc), "stage": exc.stage.value}, status_code=502)
            chart, error = chart_for(new_trace, session.db)
            version = TraceVersion(
                number=len(session.versions) + 1, trace_json=new_trace.to_json(),
                diff_json=diff.to_json(), chart_json=chart,
                vql_text=new_trace.final_vql(),
            )
            session.versions.append(version)
            persist({"type": "version", "session": session.id, "number": version.number,
                     "trace": version.trace_json, "diff": version.diff_json,
                     "chart": chart, "vql": version.vql_text})
            if error is not None:
                return JSONResponse({**error, "version": version.number,
                                     "diff": version.diff_json}, status_code=422)
            return {"version": version.number, "trace": version.trace_json,
                    "diff": version.diff_json, "chart": chart}
        finally:
            session.lock.release()

    @app.get("/sessions/{session_id}/export")
    def export(session_id: str, kind: str = "vql"):
        session = get_session(session_id)
        if isinstance(session, JSONResponse):
            return session
        if session.current is None:
            return JSONResponse({"error": "no trace yet"}, status_code=409)
        if kind == "vql":
            try:
                query = vql.parse_vql(session.current.vql_text)
                text = vql.canonicalize(query)
            except vql.ParseError:
                text = session.current.vql_text
            return PlainTextResponse(text)
        if kind == "chart-spec":
            if session.current.chart_json is None:
                return JSONResponse({"error": "final VQL did not execute"}, status_code=422)
            return session.current.chart_json
        return JSONResponse({"error": f"unknown export kind {kind!r}"}, status_code=400)

    return app
