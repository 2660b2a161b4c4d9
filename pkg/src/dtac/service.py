"""HTTP session service for interactive proof steering.

Sessions are in-memory; each serializes its own mutations behind a lock.  No
state that fails the typechecker or the refactoring guard is ever stored.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .engine import Engine, EngineFailure, RunResult
from .nodes import Program
from .oracle import FixtureError, FixtureOracle, load_fixture
from .parser import ParseError, parse_program
from .positions import anchor_lines
from .printer import print_program
from .replay import unified_diff
from .stdlib import load_stdlib
from .tactic_parser import TacticParseError, parse_tactic_invocation


@dataclass
class HistoryEntry:
    program: Program
    invocation: Optional[str]
    guard_ok: bool
    guard_text: str


@dataclass
class Session:
    id: str
    oracle: FixtureOracle
    history: list[HistoryEntry] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def program(self) -> Program:
        return self.history[-1].program


class CreateBody(BaseModel):
    program: str
    fixture: str = ""


class ApplyBody(BaseModel):
    invocation: str


def create_app(snapshot_dir: Optional[str] = None,
               static_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="dtac workbench")
    library = load_stdlib()
    engine = Engine(library.defs)
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()

    def get_session(session_id: str) -> Session:
        s = sessions.get(session_id)
        if s is None:
            raise HTTPException(404, f"unknown session {session_id}")
        return s

    def snapshot(session: Session):
        if snapshot_dir is None:
            return
        d = Path(snapshot_dir) / session.id
        d.mkdir(parents=True, exist_ok=True)
        n = len(session.history) - 1
        (d / f"{n:04d}.mdfy").write_text(print_program(session.program), "utf-8")

    def program_payload(session: Session) -> dict:
        prog = session.program
        reports = session.oracle.get_reports(prog)
        return {
            "text": print_program(prog),
            "anchors": anchor_lines(prog),
            "errors": [
                {"kind": r.kind, "property": _expr_text(r.property),
                 "line": r.line, "col": r.col}
                for r in reports
            ],
        }

    @app.post("/sessions")
    def create_session(body: CreateBody):
        try:
            prog = parse_program(body.program)
            fixture = load_fixture(body.fixture or "", prog)
        except (ParseError, FixtureError) as e:
            raise HTTPException(422, str(e))
        from .typecheck import typecheck
        errors = typecheck(prog)
        if errors:
            raise HTTPException(422, "; ".join(str(e) for e in errors[:5]))
        session = Session(uuid.uuid4().hex, FixtureOracle(fixture))
        session.history.append(HistoryEntry(prog, None, True, "guard: ok"))
        with registry_lock:
            sessions[session.id] = session
        snapshot(session)
        return {"id": session.id}

    @app.get("/sessions/{session_id}/program")
    def get_program(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return program_payload(session)

    @app.post("/sessions/{session_id}/apply")
    def apply_invocation(session_id: str, body: ApplyBody):
        session = get_session(session_id)
        with session.lock:
            try:
                trans = parse_tactic_invocation(body.invocation)
            except TacticParseError as e:
                return {"ok": False, "failure": f"parse error: {e}",
                        "status": "parse-error"}
            before = session.program
            try:
                result: RunResult = engine.run_dtac(before, trans, session.oracle)
            except EngineFailure as e:
                return {"ok": False, "failure": e.report(),
                        "status": "engine-failure"}
            diff = unified_diff(before, result.program)
            session.history.append(HistoryEntry(
                result.program, body.invocation, result.guard.ok,
                str(result.guard)))
            snapshot(session)
            payload = program_payload(session)
            return {"ok": True, "program": payload["text"],
                    "anchors": payload["anchors"],
                    "errors": payload["errors"],
                    "guard": str(result.guard), "diff": diff}

    @app.post("/sessions/{session_id}/undo")
    def undo(session_id: str):
        session = get_session(session_id)
        with session.lock:
            if len(session.history) <= 1:
                raise HTTPException(409, "nothing to undo")
            session.history.pop()
            payload = program_payload(session)
            return {"ok": True, "program": payload["text"],
                    "anchors": payload["anchors"], "errors": payload["errors"]}

    @app.get("/sessions/{session_id}/history")
    def history(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return [
                {"index": i, "invocation": h.invocation, "guard": h.guard_text}
                for i, h in enumerate(session.history)
            ]

    @app.get("/sessions/{session_id}/errors")
    def errors(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return program_payload(session)["errors"]

    @app.get("/stdlib")
    def stdlib_listing():
        return [
            {"name": d.name, "arity": len(d.formals), "formals": d.formals,
             "doc": d.doc}
            for d in library.defs
        ]

    if static_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def _expr_text(e) -> str:
    from .printer import print_expr
    return print_expr(e)
