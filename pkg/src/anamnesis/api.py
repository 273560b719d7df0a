"""HTTP surface of the session service (FastAPI application factory)."""

from __future__ import annotations

import logging
from typing import Any, Optional

from fastapi import Depends, FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .errors import (
    AnamnesisError,
    BackendError,
    CorpusLoadError,
    EmptyAnswer,
    NoPendingQuestion,
    NotActive,
    NotTerminated,
    SchemaViolation,
    SessionNotFound,
    StaleTurnToken,
)
from .service import SessionStore
from .termination import TerminationConfig

logger = logging.getLogger(__name__)

_STATUS_BY_ERROR: list[tuple[type[Exception], int]] = [
    (SessionNotFound, 404),
    (StaleTurnToken, 409),
    (NotActive, 409),
    (NotTerminated, 409),
    (NoPendingQuestion, 409),
    (EmptyAnswer, 400),
    (CorpusLoadError, 500),
    (SchemaViolation, 502),
    (BackendError, 503),
]


def _status_for(exc: Exception) -> int:
    for error_type, status in _STATUS_BY_ERROR:
        if isinstance(exc, error_type):
            return status
    return 500


class CreateSessionBody(BaseModel):
    language: str = "en"
    gender: Optional[str] = None
    session_id: Optional[str] = None
    config: Optional[dict[str, Any]] = None


class AnswerBody(BaseModel):
    answer: str = Field(min_length=1)
    turn_token: str


def create_app(
    store: SessionStore,
    api_token: Optional[str] = None,
    ui_dir: Optional[str] = None,
) -> FastAPI:
    """Assemble the service around a session store.

    When ``api_token`` is set, every endpoint except the health probe
    requires ``Authorization: Bearer <token>``.
    """
    app = FastAPI(title="anamnesis", version="0.1.0")

    def require_token(request: Request) -> None:
        if api_token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {api_token}":
            from fastapi import HTTPException

            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    auth = Depends(require_token)

    @app.exception_handler(AnamnesisError)
    async def handle_domain_error(request: Request, exc: AnamnesisError) -> JSONResponse:
        status = _status_for(exc)
        headers = {"Retry-After": "1"} if status == 503 else None
        if status >= 500:
            logger.error("%s on %s: %s", type(exc).__name__, request.url.path, exc)
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
            headers=headers,
        )

    @app.get("/healthz")
    def healthz() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/sessions", dependencies=[auth])
    def create_session(body: CreateSessionBody) -> dict[str, Any]:
        termination = None
        if body.config:
            termination = TerminationConfig.from_mapping(body.config)
        return store.create_session(
            language=body.language,
            gender=body.gender,
            session_id=body.session_id,
            termination=termination,
        )

    @app.post("/sessions/{session_id}/answers", dependencies=[auth])
    def submit_answer(session_id: str, body: AnswerBody) -> dict[str, Any]:
        return store.submit_answer(session_id, body.answer, body.turn_token)

    @app.get("/sessions/{session_id}/snapshot", dependencies=[auth])
    def get_snapshot(session_id: str) -> dict[str, Any]:
        return store.get_snapshot(session_id)

    @app.get("/sessions/{session_id}/report", dependencies=[auth])
    def get_report(session_id: str) -> dict[str, Any]:
        return store.get_report(session_id).to_wire()

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
