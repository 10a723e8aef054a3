"""HTTP surface of the scheduling service.

Six endpoints around the session manager: create, control, directive
patch, latest solution, an event stream with text/event-stream framing,
and a health probe.  Every error body is {code, message, details}.  When
a bearer token is configured, every endpoint except the health probe
requires it.
"""

from __future__ import annotations

import json
from contextlib import asynccontextmanager
from typing import Any, Iterator

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, StreamingResponse

from .schemas import ControlBody, CreateSessionBody, DirectivePatchBody
from .sessions import Invalid, ServiceError, SessionManager
from .store import SessionStore

_SSE_HEADERS = {"cache-control": "no-cache", "x-accel-buffering": "no"}


def _error_response(status: int, code: str, message: str, details: Any) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"code": code, "message": message, "details": details}
    )


def _frame_events(events: Iterator[tuple[str, dict[str, Any]]]) -> Iterator[str]:
    """Turn (kind, payload) pairs into text/event-stream frames."""
    for kind, payload in events:
        if kind == "keepalive":
            yield ": keepalive\n\n"
            continue
        data = json.dumps(payload, sort_keys=True)
        if kind == "incumbent":
            yield f"event: incumbent\nid: {payload['record']['sequence']}\ndata: {data}\n\n"
        else:
            yield f"event: {kind}\ndata: {data}\n\n"


def create_app(
    db_path: str,
    *,
    token: str | None = None,
    stream_queue_size: int = 256,
    poll_interval: float = 0.25,
) -> FastAPI:
    store = SessionStore(db_path)
    manager = SessionManager(
        store, stream_queue_size=stream_queue_size, poll_interval=poll_interval
    )

    def close() -> None:
        manager.shutdown()
        store.close()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        close()

    app = FastAPI(title="wardroster", docs_url=None, redoc_url=None, lifespan=lifespan)
    app.state.manager = manager
    app.state.close = close

    @app.middleware("http")
    async def _auth(request: Request, call_next):
        if token is not None and request.url.path != "/healthz":
            if request.headers.get("authorization") != f"Bearer {token}":
                return _error_response(
                    401, "unauthorized", "missing or invalid bearer token", {}
                )
        return await call_next(request)

    @app.exception_handler(ServiceError)
    async def _service_error(request: Request, exc: ServiceError):
        return _error_response(exc.status, exc.code, exc.message, exc.details)

    @app.exception_handler(RequestValidationError)
    async def _body_error(request: Request, exc: RequestValidationError):
        details = [
            {
                "loc": [str(part) for part in err.get("loc", ())],
                "msg": str(err.get("msg", "")),
                "type": str(err.get("type", "")),
            }
            for err in exc.errors()
        ]
        return _error_response(
            422, "validation_error", "request body failed validation", details
        )

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody) -> dict[str, str]:
        session_id = manager.create(body.instance, body.config.as_kwargs(), body.directives)
        return {"id": session_id, "state": "created"}

    @app.post("/sessions/{session_id}/control")
    def control(session_id: str, body: ControlBody) -> dict[str, str]:
        state = manager.control(session_id, body.command, body.flag)
        return {"id": session_id, "state": state}

    @app.patch("/sessions/{session_id}/directives")
    def patch_directives(session_id: str, body: DirectivePatchBody) -> dict[str, Any]:
        if body.is_empty():
            raise Invalid("empty directive patch")
        revision = manager.patch_directives(session_id, body.model_dump())
        return {"id": session_id, "revision": revision}

    @app.get("/sessions/{session_id}/solution")
    def solution(session_id: str) -> dict[str, Any]:
        return manager.solution(session_id)

    @app.get("/sessions/{session_id}/events")
    def events(session_id: str, from_sequence: int = 0) -> StreamingResponse:
        manager.ensure_session(session_id)
        frames = _frame_events(manager.stream_events(session_id, from_sequence))
        return StreamingResponse(frames, media_type="text/event-stream", headers=_SSE_HEADERS)

    @app.get("/healthz")
    def healthz() -> dict[str, Any]:
        return {"status": "ok", "sessions": manager.session_count()}

    return app


def run_server(
    host: str = "127.0.0.1",
    port: int = 8000,
    db_path: str = "wardroster.sqlite3",
    token: str | None = None,
) -> None:
    import uvicorn

    uvicorn.run(create_app(db_path, token=token), host=host, port=port, log_level="info")
