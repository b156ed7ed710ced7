"""HTTP service exposing sessions, ports, and the module catalog.

Endpoints are synchronous on purpose: FastAPI runs them in a thread pool
and the per-session locks in SessionManager serialize calls that touch
the same session while different sessions proceed in parallel.
"""

from __future__ import annotations

import os
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..config import AppConfig, default_config
from ..hardware import ManifestInvalid
from ..knobs import KnobValueError, StaleManifest, UnknownKnob
from ..llm import AuthenticationError, ProviderError, ProviderTimeout, RateLimited
from ..loop import InvalidTransition
from ..session import ConflictError, ReplayError, SessionManager, SessionNotFound
from ..toolchain import ToolchainError, ToolchainNotFound, ToolchainTimeout
from .schemas import (
    CatalogEnvelope,
    CreateSessionRequest,
    KnobPatchRequest,
    KnobsEnvelope,
    KnobManifestModel,
    MessageRequest,
    PortModel,
    PortsEnvelope,
    ReplayEnvelope,
    SessionEnvelope,
    UploadRequest,
    catalog_to_model,
    session_to_model,
)

_ERROR_MAP: list[tuple[type, int, str]] = [
    # subclasses before parents: lookup walks this list in order
    (ManifestInvalid, 400, "invalid-manifest"),
    (KnobValueError, 400, "knob-value"),
    (UnknownKnob, 404, "unknown-knob"),
    (StaleManifest, 409, "stale-manifest"),
    (SessionNotFound, 404, "not-found"),
    (ConflictError, 409, "conflict"),
    (InvalidTransition, 409, "conflict"),
    (AuthenticationError, 502, "provider-auth"),
    (RateLimited, 502, "rate-limited"),
    (ProviderTimeout, 504, "provider-timeout"),
    (ProviderError, 502, "provider-error"),
    (ToolchainTimeout, 504, "toolchain-timeout"),
    (ToolchainNotFound, 502, "toolchain-missing"),
    (ToolchainError, 502, "toolchain-error"),
    (ReplayError, 500, "replay-error"),
    (ValueError, 400, "bad-request"),
]


def _error_body(code: str, exc: Exception) -> dict:
    body = {"error": {"code": code, "message": str(exc)}}
    if isinstance(exc, ManifestInvalid):
        body["error"]["findings"] = [
            {
                "severity": f.severity,
                "code": f.code,
                "message": f.message,
                "offending_id": f.offending_id,
            }
            for f in exc.report.findings
        ]
    return body


def create_app(
    config: AppConfig | None = None,
    manager: SessionManager | None = None,
    ui_dir: str | None = None,
) -> FastAPI:
    if manager is None:
        manager = SessionManager(config or default_config())

    app = FastAPI(title="sketchpilot", docs_url="/api/docs", openapi_url="/api/openapi.json")
    app.state.manager = manager

    for exc_type, status, code in _ERROR_MAP:

        def handler(request: Request, exc: Exception, status=status, code=code) -> JSONResponse:
            return JSONResponse(status_code=status, content=_error_body(code, exc))

        app.add_exception_handler(exc_type, handler)

    @app.post("/api/sessions", response_model=SessionEnvelope, status_code=201)
    def create_session(body: CreateSessionRequest):
        session = manager.create_session(body.manifest.to_manifest())
        return SessionEnvelope(session=session_to_model(session))

    @app.get("/api/sessions/{session_id}", response_model=SessionEnvelope)
    def get_session(session_id: str):
        return SessionEnvelope(session=session_to_model(manager.get_session(session_id)))

    @app.post("/api/sessions/{session_id}/message", response_model=SessionEnvelope)
    def post_message(session_id: str, body: MessageRequest):
        return SessionEnvelope(session=session_to_model(manager.post_instruction(session_id, body.text)))

    @app.post("/api/sessions/{session_id}/compile", response_model=SessionEnvelope)
    def compile_session(session_id: str):
        return SessionEnvelope(session=session_to_model(manager.compile_current(session_id)))

    @app.post("/api/sessions/{session_id}/upload", response_model=SessionEnvelope)
    def upload_session(session_id: str, body: UploadRequest):
        return SessionEnvelope(session=session_to_model(manager.upload_current(session_id, body.port)))

    @app.post("/api/sessions/{session_id}/compile-upload", response_model=SessionEnvelope)
    def compile_upload_session(session_id: str, body: UploadRequest):
        return SessionEnvelope(session=session_to_model(manager.compile_and_upload(session_id, body.port)))

    @app.get("/api/sessions/{session_id}/knobs", response_model=KnobsEnvelope)
    def get_knobs(session_id: str):
        return KnobsEnvelope(knobs=KnobManifestModel(**manager.get_knobs(session_id).to_dict()))

    @app.patch("/api/sessions/{session_id}/knobs/{knob_id}", response_model=SessionEnvelope)
    def patch_knob(session_id: str, knob_id: str, body: KnobPatchRequest):
        return SessionEnvelope(session=session_to_model(manager.set_knob(session_id, knob_id, body.value)))

    @app.get("/api/sessions/{session_id}/replay", response_model=ReplayEnvelope)
    def replay_session(session_id: str):
        live = manager.get_session(session_id)
        replayed = manager.replay(session_id)
        return ReplayEnvelope(session=session_to_model(replayed), matches_live=replayed == live)

    @app.get("/api/ports", response_model=PortsEnvelope)
    def get_ports():
        return PortsEnvelope(ports=[PortModel(port=p, hint=h) for p, h in manager.list_ports()])

    @app.get("/api/catalog", response_model=CatalogEnvelope)
    def get_catalog():
        return CatalogEnvelope(catalog=catalog_to_model(manager.catalog))

    static_dir = ui_dir or os.environ.get("SKETCHPILOT_UI_DIR")
    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
