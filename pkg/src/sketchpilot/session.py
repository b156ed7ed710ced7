"""Event-sourced sessions tying provider, repair loop, knobs, and toolchain together.

Every state change is first recorded as a JSON Lines event, then folded
into the in-memory session through the same pure reducer that replay
uses. Live state and replayed state therefore agree by construction;
only timestamps fall outside the replayed fields. Provider and toolchain
calls happen before their events are committed, so an infrastructure
failure leaves the log exactly as it was.
"""

from __future__ import annotations

import json
import logging
import threading
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from . import loop as loop_ops
from .config import AppConfig
from .extractor import GeneratedSketch, StructuralFinding
from .hardware import (
    Catalog,
    HardwareManifest,
    ManifestInvalid,
    load_default_catalog,
    manifest_to_prompt_context,
    validate_manifest,
)
from .knobs import KnobManifest, extract_knobs, patch_knob
from .knobs import sketch_version as compute_sketch_version
from .llm import ChatMessage, Conversation, build_system_prompt, make_provider
from .loop import LoopState
from .toolchain import (
    CompileResult,
    Diagnostic,
    PortLeases,
    UploadResult,
    compile_sketch,
    list_ports,
    prepare_sketch_dir,
    upload_sketch,
)

log = logging.getLogger(__name__)

EVENT_KINDS = frozenset(
    {
        "created",
        "manifest-set",
        "user-message",
        "model-reply",
        "sketch-extracted",
        "compile-requested",
        "compile-result",
        "upload-requested",
        "upload-result",
        "knob-patched",
        "port-selected",
    }
)


class SessionError(Exception):
    pass


class SessionNotFound(SessionError):
    pass


class ConflictError(SessionError):
    """The call does not apply in the session's current state."""


class ReplayError(SessionError):
    pass


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    at: str
    kind: str
    payload: dict


@dataclass(frozen=True)
class SketchVersion:
    version: str
    sketch: GeneratedSketch
    knobs: KnobManifest


@dataclass
class Session:
    id: str
    loop_state: LoopState
    manifest: HardwareManifest | None = None
    conversation: Conversation | None = None
    sketch_versions: list[SketchVersion] = field(default_factory=list)
    selected_port: str | None = None
    last_upload: UploadResult | None = None
    next_seq: int = 1

    @property
    def current(self) -> SketchVersion | None:
        return self.sketch_versions[-1] if self.sketch_versions else None


class EventStore:
    """One append-only JSON Lines file per session under {data_dir}/sessions."""

    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir) / "sessions"
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.jsonl"

    def session_ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.jsonl"))

    def append(self, session_id: str, items: list[tuple[str, dict]], start_seq: int) -> list[SessionEvent]:
        at = datetime.now(timezone.utc).isoformat()
        events = [
            SessionEvent(seq=start_seq + i, at=at, kind=kind, payload=payload)
            for i, (kind, payload) in enumerate(items)
        ]
        lines = "".join(
            json.dumps(
                {"seq": e.seq, "at": e.at, "kind": e.kind, "payload": e.payload},
                ensure_ascii=False,
            )
            + "\n"
            for e in events
        )
        with open(self.path(session_id), "a", encoding="utf-8") as handle:
            handle.write(lines)
        return events

    def read(self, session_id: str) -> list[SessionEvent]:
        path = self.path(session_id)
        if not path.exists():
            raise ReplayError(f"no event log for session {session_id!r}")
        events: list[SessionEvent] = []
        with open(path, encoding="utf-8") as handle:
            for number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    data = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ReplayError(f"seq {number}: invalid JSON ({exc})") from exc
                expected = len(events) + 1
                if data.get("seq") != expected:
                    raise ReplayError(f"seq {expected}: log has seq {data.get('seq')!r}")
                kind = data.get("kind")
                if kind not in EVENT_KINDS:
                    raise ReplayError(f"seq {expected}: unknown kind {kind!r}")
                events.append(
                    SessionEvent(seq=expected, at=data.get("at", ""), kind=kind, payload=data.get("payload", {}))
                )
        if not events:
            raise ReplayError(f"event log for session {session_id!r} is empty")
        return events


def _to_awaiting(state: LoopState) -> LoopState:
    """Enter awaiting-model for the reply being folded in.

    A fresh instruction (anything but an in-flight awaiting-model) opens a
    new cycle with a fresh call budget."""
    if state.status == "awaiting-model":
        return state
    if state.status == "idle":
        return replace(state, status="awaiting-model")
    return replace(state, status="awaiting-model", cycle_calls=0, pending_user_message=None)


def _sketch_payload(sketch: GeneratedSketch) -> dict:
    return {
        "source": sketch.source,
        "method": sketch.method,
        "origin_span": list(sketch.origin_span),
        "findings": [
            {"severity": f.severity, "code": f.code, "message": f.message} for f in sketch.findings
        ],
        "version": compute_sketch_version(sketch.source),
    }


def _sketch_from_payload(payload: dict) -> GeneratedSketch:
    return GeneratedSketch(
        source=payload["source"],
        method=payload["method"],
        origin_span=tuple(payload["origin_span"]),
        findings=tuple(
            StructuralFinding(severity=f["severity"], code=f["code"], message=f["message"])
            for f in payload.get("findings", [])
        ),
    )


def _compile_result_payload(result: CompileResult) -> dict:
    return {
        "success": result.success,
        "diagnostics": [d.to_dict() for d in result.diagnostics],
        "raw_output": result.raw_output,
        "artifact_path": result.artifact_path,
    }


def _compile_result_from_payload(payload: dict) -> CompileResult:
    return CompileResult(
        success=payload["success"],
        diagnostics=tuple(Diagnostic.from_dict(d) for d in payload["diagnostics"]),
        raw_output=payload["raw_output"],
        artifact_path=payload.get("artifact_path"),
    )


def _patched_sketch(source: str) -> GeneratedSketch:
    return GeneratedSketch(
        source=source,
        method="patched",
        origin_span=(0, len(source.encode("utf-8"))),
        findings=(),
    )


class SessionManager:
    """Owns all sessions; one exclusive lock per session serializes its API calls."""

    def __init__(self, config: AppConfig, catalog: Catalog | None = None, provider=None):
        self.config = config
        self.catalog = catalog if catalog is not None else load_default_catalog()
        self.provider = provider if provider is not None else make_provider(config.provider)
        self.store = EventStore(config.data_dir)
        self.leases = PortLeases()
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self._load_existing()

    # -- lifecycle ---------------------------------------------------------

    def _load_existing(self) -> None:
        for session_id in self.store.session_ids():
            try:
                session = self.replay(session_id)
            except ReplayError as exc:
                log.warning("skipping session %s: %s", session_id, exc)
                continue
            self._sessions[session_id] = session
            self._locks[session_id] = threading.Lock()

    def create_session(self, manifest: HardwareManifest | dict) -> Session:
        if isinstance(manifest, dict):
            manifest = HardwareManifest.from_dict(manifest)
        report = validate_manifest(manifest, self.catalog)
        if not report.ok:
            raise ManifestInvalid(report)
        session_id = uuid.uuid4().hex[:12]
        session = Session(id=session_id, loop_state=LoopState(policy=self.config.loop))
        self._commit(
            session,
            [
                ("created", {"session_id": session_id}),
                ("manifest-set", {"manifest": manifest.to_dict()}),
            ],
        )
        with self._registry_lock:
            self._sessions[session_id] = session
            self._locks[session_id] = threading.Lock()
        return session

    def get_session(self, session_id: str) -> Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise SessionNotFound(f"no session {session_id!r}") from None

    def session_ids(self) -> list[str]:
        return sorted(self._sessions)

    def _lock(self, session_id: str) -> threading.Lock:
        try:
            return self._locks[session_id]
        except KeyError:
            raise SessionNotFound(f"no session {session_id!r}") from None

    # -- event plumbing ----------------------------------------------------

    def _commit(self, session: Session, items: list[tuple[str, dict]]) -> None:
        events = self.store.append(session.id, items, start_seq=session.next_seq)
        for event in events:
            self._apply(session, event)

    def _apply(self, session: Session, event: SessionEvent) -> None:
        kind, payload = event.kind, event.payload
        if kind == "created":
            if payload.get("session_id") != session.id:
                raise ValueError("created event names a different session")
        elif kind == "manifest-set":
            session.manifest = HardwareManifest.from_dict(payload["manifest"])
        elif kind == "user-message":
            message = ChatMessage(role="user", content=payload["content"])
            if session.conversation is None:
                context = manifest_to_prompt_context(session.manifest, self.catalog)
                session.conversation = Conversation((build_system_prompt(context), message))
            else:
                session.conversation = session.conversation.append(message)
        elif kind == "model-reply":
            message = ChatMessage(role="assistant", content=payload["content"])
            session.conversation = session.conversation.append(message)
            session.loop_state = loop_ops.on_model_reply(_to_awaiting(session.loop_state), message)
        elif kind == "sketch-extracted":
            sketch = _sketch_from_payload(payload)
            session.sketch_versions.append(
                SketchVersion(version=payload["version"], sketch=sketch, knobs=extract_knobs(sketch.source))
            )
        elif kind == "compile-requested":
            session.loop_state = loop_ops.begin_compile(session.loop_state)
        elif kind == "compile-result":
            result = _compile_result_from_payload(payload)
            session.loop_state = loop_ops.on_compile_result(session.loop_state, result)
        elif kind == "upload-requested":
            pass
        elif kind == "upload-result":
            session.last_upload = UploadResult(
                success=payload["success"], port=payload["port"], raw_output=payload["raw_output"]
            )
        elif kind == "port-selected":
            session.selected_port = payload["port"]
        elif kind == "knob-patched":
            sketch = _patched_sketch(payload["source"])
            session.sketch_versions.append(
                SketchVersion(version=payload["version"], sketch=sketch, knobs=extract_knobs(sketch.source))
            )
            session.loop_state = loop_ops.with_patched_sketch(session.loop_state, sketch)
        else:
            raise ValueError(f"unknown event kind {kind!r}")
        session.next_seq = event.seq + 1

    def replay(self, session_id: str) -> Session:
        events = self.store.read(session_id)
        first = events[0]
        if first.kind != "created":
            raise ReplayError("seq 1: first event must be 'created'")
        session = Session(id=first.payload.get("session_id", session_id), loop_state=LoopState(policy=self.config.loop))
        for event in events:
            try:
                self._apply(session, event)
            except ReplayError:
                raise
            except Exception as exc:
                raise ReplayError(f"seq {event.seq}: {exc}") from exc
        return session

    # -- conversation driving ----------------------------------------------

    def post_instruction(self, session_id: str, text: str) -> Session:
        if not text or not text.strip():
            raise ValueError("instruction must be non-empty")
        session = self.get_session(session_id)
        with self._lock(session_id):
            conversation = session.conversation
            if conversation is not None and conversation.last.role == "user":
                # The previous send never got its reply (provider failure).
                if conversation.last.content != text:
                    raise ConflictError(
                        "a model reply is still pending; retry the same text to resend"
                    )
            else:
                self._commit(session, [("user-message", {"content": text})])
            self._advance_model(session)
            while (
                session.loop_state.status == "awaiting-model"
                and session.loop_state.pending_user_message is not None
            ):
                self._send_pending(session)
            return session

    def _advance_model(self, session: Session) -> None:
        reply = self.provider.complete(session.conversation)
        staged = loop_ops.on_model_reply(_to_awaiting(session.loop_state), reply)
        items: list[tuple[str, dict]] = [("model-reply", {"content": reply.content})]
        if staged.status == "extracted":
            items.append(("sketch-extracted", _sketch_payload(staged.current_sketch)))
        self._commit(session, items)

    def _send_pending(self, session: Session) -> None:
        pending = session.loop_state.pending_user_message
        if pending is None:
            raise ConflictError("no queued message to send")
        if session.conversation.last.role != "user":
            self._commit(session, [("user-message", {"content": pending.content})])
        self._advance_model(session)

    # -- toolchain driving ---------------------------------------------------

    def compile_current(self, session_id: str) -> Session:
        session = self.get_session(session_id)
        with self._lock(session_id):
            self._drive_compile(session)
            return session

    def _drive_compile(self, session: Session) -> None:
        state = session.loop_state
        if state.terminal:
            raise ConflictError(f"loop already {state.status}; send a new instruction or patch a knob")
        if not session.sketch_versions:
            raise ConflictError("no sketch to compile yet")
        progressed = False
        while True:
            state = session.loop_state
            if state.status == "extracted":
                self._compile_once(session)
                progressed = True
            elif state.status == "awaiting-model" and state.pending_user_message is not None:
                self._send_pending(session)
                progressed = True
            else:
                break
        if not progressed:
            raise ConflictError(f"nothing to compile in status {session.loop_state.status!r}")

    def _compile_once(self, session: Session) -> None:
        loop_ops.begin_compile(session.loop_state)  # validate before any I/O
        current = session.current
        sketch_dir = prepare_sketch_dir(current.sketch, self._sketch_name(session), self.config.toolchain.work_root)
        result = compile_sketch(sketch_dir, self.config.toolchain)
        self._commit(
            session,
            [
                ("compile-requested", {"version": current.version}),
                ("compile-result", _compile_result_payload(result)),
            ],
        )

    def upload_current(self, session_id: str, port: str) -> Session:
        session = self.get_session(session_id)
        with self._lock(session_id):
            self._upload_locked(session, port)
            return session

    def _upload_locked(self, session: Session, port: str) -> None:
        if not port or not port.strip():
            raise ValueError("port must be non-empty")
        current = session.current
        if current is None:
            raise ConflictError("no sketch to upload yet")
        if self.config.toolchain.kind == "external":
            last = session.loop_state.last_result
            if last is None or not last.success:
                raise ConflictError("upload requires a successful compile first")
        sketch_dir = prepare_sketch_dir(current.sketch, self._sketch_name(session), self.config.toolchain.work_root)
        result = upload_sketch(sketch_dir, port, self.config.toolchain, self.leases)
        items: list[tuple[str, dict]] = [
            ("upload-requested", {"port": port}),
            ("upload-result", {"success": result.success, "port": result.port, "raw_output": result.raw_output}),
        ]
        if result.success and session.selected_port != port:
            items.append(("port-selected", {"port": port}))
        self._commit(session, items)

    def compile_and_upload(self, session_id: str, port: str) -> Session:
        session = self.get_session(session_id)
        with self._lock(session_id):
            self._drive_compile(session)
            state = session.loop_state
            if state.status == "succeeded" and state.last_result is not None and state.last_result.success:
                self._upload_locked(session, port)
            return session

    def list_ports(self) -> list[tuple[str, str | None]]:
        return list_ports(self.config.toolchain)

    def _sketch_name(self, session: Session) -> str:
        return f"s{session.id}"

    # -- knobs ---------------------------------------------------------------

    def get_knobs(self, session_id: str) -> KnobManifest:
        session = self.get_session(session_id)
        current = session.current
        if current is None:
            raise ConflictError("no sketch yet, so no knobs")
        return current.knobs

    def set_knob(self, session_id: str, knob_id: str, value: float | int) -> Session:
        session = self.get_session(session_id)
        with self._lock(session_id):
            current = session.current
            if current is None:
                raise ConflictError("no sketch yet, so no knobs")
            new_source, new_manifest = patch_knob(current.sketch.source, current.knobs, knob_id, value)
            # validate the loop transition before committing anything
            loop_ops.with_patched_sketch(session.loop_state, _patched_sketch(new_source))
            self._commit(
                session,
                [
                    (
                        "knob-patched",
                        {
                            "knob_id": knob_id,
                            "value": value,
                            "source": new_source,
                            "version": new_manifest.sketch_version,
                        },
                    )
                ],
            )
            return session
