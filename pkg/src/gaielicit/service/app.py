"""HTTP session service: problem ingestion, query serving, responses,
recommendations, export/restore.  One lock per session serializes mutations;
reads serve the latest acknowledged state."""

from __future__ import annotations

import os
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles

from .. import __version__
from ..inference import InfeasibleError
from ..problemfile import ProblemFormatError, demo_problem, parse_problem
from ..session import SessionError, StaleQueryError
from .schemas import (
    CreateSessionRequest,
    CreateSessionResponse,
    HealthResponse,
    NextQueryResponse,
    ProblemSummary,
    RestoreSessionRequest,
    SubmitResponseRequest,
    ValidationReport,
)
from .store import SessionStore, UnknownSessionError

BUILTIN_PROBLEMS = {"team-dinner": demo_problem}


def create_app(store: SessionStore, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="gaielicit session service", version=__version__)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def get_session(session_id: str):
        try:
            return store.get(session_id)
        except UnknownSessionError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", sessions=store.session_count(), version=__version__)

    @app.get("/problems", response_model=list[ProblemSummary])
    def list_problems():
        out = []
        for pid, fn in BUILTIN_PROBLEMS.items():
            doc = fn()
            out.append(
                ProblemSummary(
                    id=pid,
                    name=doc.get("name", pid),
                    attributes=len(doc["attributes"]),
                    factors=len(doc["factors"]),
                )
            )
        return out

    @app.get("/problems/{problem_id}")
    def get_problem(problem_id: str):
        if problem_id not in BUILTIN_PROBLEMS:
            raise HTTPException(status_code=404, detail=f"unknown problem {problem_id!r}")
        return BUILTIN_PROBLEMS[problem_id]()

    @app.post("/problems/validate", response_model=ValidationReport)
    def validate_problem(problem: dict):
        try:
            parse_problem(problem)
        except ProblemFormatError as exc:
            return ValidationReport(valid=False, problems=[str(exc)])
        return ValidationReport(valid=True, problems=[])

    @app.post("/sessions", response_model=CreateSessionResponse)
    def create_session(body: CreateSessionRequest):
        try:
            session = store.create(body.problem, body.mode, body.random_fallback)
        except (ProblemFormatError, SessionError, InfeasibleError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return CreateSessionResponse(session_id=session.id, summary=session.summary())

    @app.post("/sessions/restore", response_model=CreateSessionResponse)
    def restore_session(body: RestoreSessionRequest):
        try:
            session = store.restore_document(body.document)
        except (ProblemFormatError, SessionError, InfeasibleError, KeyError) as exc:
            raise HTTPException(status_code=422, detail=f"cannot restore: {exc}")
        return CreateSessionResponse(session_id=session.id, summary=session.summary())

    @app.get("/sessions/{session_id}")
    def session_summary(session_id: str):
        session = get_session(session_id)
        with store.lock(session.id):
            return session.summary()

    @app.get("/sessions/{session_id}/next-query", response_model=NextQueryResponse)
    def next_query(session_id: str):
        session = get_session(session_id)
        with store.lock(session.id):
            card = session.next_query()
        return NextQueryResponse(complete=card is None, query=card)

    @app.post("/sessions/{session_id}/responses")
    def submit_response(session_id: str, body: SubmitResponseRequest):
        session = get_session(session_id)
        with store.lock(session.id):
            try:
                summary = session.submit(body.query_id, body.response)
            except StaleQueryError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            except (SessionError, ValueError) as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            store.record_response(session, session.transcript[-1])
        return summary

    @app.get("/sessions/{session_id}/recommendation")
    def recommendation(session_id: str):
        session = get_session(session_id)
        with store.lock(session.id):
            rec = session.recommendation()
        if rec is None:
            raise HTTPException(
                status_code=409, detail="exact elicitation incomplete; no recommendation yet"
            )
        return rec

    @app.get("/sessions/{session_id}/beliefs")
    def beliefs(session_id: str):
        session = get_session(session_id)
        if session.mode != "evoi":
            raise HTTPException(status_code=409, detail="exact sessions carry no beliefs")
        with store.lock(session.id):
            return {"parameters": session.beliefs_summary()}

    @app.get("/sessions/{session_id}/export")
    def export_session(session_id: str):
        session = get_session(session_id)
        with store.lock(session.id):
            return session.export()

    @app.post("/sessions/{session_id}/undo")
    def undo(session_id: str):
        session = get_session(session_id)
        with store.lock(session.id):
            try:
                summary = session.undo()
            except SessionError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            store.rewrite(session)
        return summary

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def load_service_config(path: str | None) -> dict:
    """Config file plus environment overrides; env wins."""
    import json

    config = {"listen": "127.0.0.1:8080", "data_dir": "./gaielicit-data", "evoi_workers": 0,
              "ui_dir": None}
    if path:
        with open(path) as fh:
            config.update(json.load(fh))
    if os.environ.get("GAIELICIT_LISTEN"):
        config["listen"] = os.environ["GAIELICIT_LISTEN"]
    if os.environ.get("GAIELICIT_DATA_DIR"):
        config["data_dir"] = os.environ["GAIELICIT_DATA_DIR"]
    if os.environ.get("GAIELICIT_EVOI_WORKERS"):
        config["evoi_workers"] = int(os.environ["GAIELICIT_EVOI_WORKERS"])
    if os.environ.get("GAIELICIT_UI_DIR"):
        config["ui_dir"] = os.environ["GAIELICIT_UI_DIR"]
    return config
