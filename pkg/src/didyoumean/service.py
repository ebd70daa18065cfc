"""HTTP facade over interaction sessions.

One process holds the corpus and both models; clients create sessions
against corpus slices and drive them through judgment and selection
endpoints. All errors come back as JSON {code, message}. Item state
transitions are serialized per session behind a lock, matching the
single-writer log discipline.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import (
    DidYouMeanError,
    DuplicateJudgment,
    EmptyRewrite,
    ItemClosed,
    NotDecided,
    NothingToExport,
    SelectionIndexOutOfRange,
    UnknownItem,
    UnknownSession,
)
from .session import ACCEPTED, REJECTED, Session, create_session

_STATUS = {
    UnknownSession: 404,
    UnknownItem: 404,
    DuplicateJudgment: 409,
    ItemClosed: 409,
    NotDecided: 409,
    NothingToExport: 409,
    SelectionIndexOutOfRange: 400,
    EmptyRewrite: 400,
}

__all__ = ["ServiceState", "build_app"]


class ServiceState:
    """Everything the endpoints need: models, data, and live sessions."""

    def __init__(
        self,
        grammar,
        corpus,
        parse_model,
        gloss_model,
        *,
        seed: int = 0,
        log_dir: str | Path | None = None,
    ):
        self.grammar = grammar
        self.corpus = corpus
        self.parse_model = parse_model
        self.gloss_model = gloss_model
        self.seed = seed
        self.log_dir = None if log_dir is None else Path(log_dir)
        self.sessions: dict[str, Session] = {}
        self.locks: dict[str, threading.Lock] = {}

    def slice_for(self, split: str, offset: int, limit: int | None):
        examples = self.corpus.split(split)
        if not examples:
            raise ValueError(f"corpus has no split {split!r}")
        end = None if limit is None else offset + limit
        return examples[offset:end]

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id!r}")
        return session

    def lock(self, session_id: str) -> threading.Lock:
        return self.locks[session_id]


class CreateSessionBody(BaseModel):
    mode: str
    tau: float
    split: str = "test"
    offset: int = 0
    limit: int | None = None
    quorum: int = 3
    seed: int | None = None


class JudgmentBody(BaseModel):
    worker_id: str
    accept: bool


class SelectionBody(BaseModel):
    index: int | None = None
    rewrite: str | None = None


def _session_summary(session: Session) -> dict:
    return {
        "session_id": session.session_id,
        "mode": session.mode,
        "tau": session.tau,
        "quorum": session.quorum,
        "seed": session.seed,
        "n_items": len(session.items),
        "states": session.state_counts(),
    }


def build_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="didyoumean", docs_url=None, redoc_url=None)

    @app.exception_handler(DidYouMeanError)
    async def domain_error(request: Request, err: DidYouMeanError):
        return JSONResponse(
            status_code=_STATUS.get(type(err), 400),
            content={"code": err.code, "message": str(err)},
        )

    @app.exception_handler(ValueError)
    async def value_error(request: Request, err: ValueError):
        return JSONResponse(
            status_code=400,
            content={"code": "bad_request", "message": str(err)},
        )

    @app.exception_handler(RequestValidationError)
    async def invalid_body(request: Request, err: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"code": "bad_request", "message": str(err)},
        )

    @app.post("/sessions", status_code=201)
    def post_session(body: CreateSessionBody):
        examples = state.slice_for(body.split, body.offset, body.limit)
        seed = state.seed if body.seed is None else body.seed
        session = create_session(
            examples,
            body.mode,
            body.tau,
            state.parse_model,
            state.gloss_model,
            grammar=state.grammar,
            quorum=body.quorum,
            seed=seed,
        )
        if state.log_dir is not None:
            state.log_dir.mkdir(parents=True, exist_ok=True)
            session.attach_log(state.log_dir / f"{session.session_id}.jsonl")
        state.sessions[session.session_id] = session
        state.locks[session.session_id] = threading.Lock()
        return _session_summary(session)

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        return _session_summary(state.get(sid))

    @app.get("/sessions/{sid}/items")
    def get_items(sid: str, item_state: str | None = Query(None, alias="state")):
        session = state.get(sid)
        items = session.items_in_state(item_state)
        return {"items": [item.to_dict() for item in items]}

    @app.get("/sessions/{sid}/items/{iid}")
    def get_item(sid: str, iid: str):
        session = state.get(sid)
        item = session.items.get(iid)
        if item is None:
            raise UnknownItem(f"no item {iid!r} in session {sid!r}")
        return item.to_dict()

    @app.post("/sessions/{sid}/items/{iid}/judgments")
    def post_judgment(sid: str, iid: str, body: JudgmentBody):
        session = state.get(sid)
        with state.lock(sid):
            judged = session.submit_judgment(iid, body.worker_id, body.accept)
            if judged in (ACCEPTED, REJECTED):
                session.finalize_item(iid)
        return session.items[iid].to_dict()

    @app.post("/sessions/{sid}/items/{iid}/selection")
    def post_selection(sid: str, iid: str, body: SelectionBody):
        session = state.get(sid)
        with state.lock(sid):
            session.submit_selection(iid, index=body.index, rewrite=body.rewrite)
        return session.items[iid].to_dict()

    @app.get("/sessions/{sid}/report")
    def get_report(sid: str):
        return state.get(sid).report().to_dict()

    @app.get("/sessions/{sid}/export")
    def get_export(sid: str):
        records = state.get(sid).export_records()
        return {"records": [record.to_dict() for record in records]}

    return app
