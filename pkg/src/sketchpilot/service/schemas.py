"""Request and response models for the HTTP API.

Responses wrap their payload under a single key ("session", "knobs",
"ports", "catalog") so clients can grow without breaking on new siblings.
"""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..hardware import Catalog, HardwareManifest
from ..session import Session


class ManifestBody(BaseModel):
    board: str
    chain: list[str] = Field(default_factory=list)
    onboard_used: list[str] = Field(default_factory=list)
    power: str | None = None
    freeform_note: str | None = None

    def to_manifest(self) -> HardwareManifest:
        return HardwareManifest(
            board=self.board,
            chain=tuple(self.chain),
            onboard_used=tuple(self.onboard_used),
            power=self.power,
            freeform_note=self.freeform_note,
        )


class CreateSessionRequest(BaseModel):
    manifest: ManifestBody


class MessageRequest(BaseModel):
    text: str


class UploadRequest(BaseModel):
    port: str


class KnobPatchRequest(BaseModel):
    value: float


class MessageModel(BaseModel):
    role: str
    content: str


class FindingModel(BaseModel):
    severity: str
    code: str
    message: str


class LoopModel(BaseModel):
    status: str
    iteration: int


class SketchModel(BaseModel):
    version: str
    source: str
    method: str
    findings: list[FindingModel]


class DiagnosticModel(BaseModel):
    file: str
    line: int
    column: int | None
    severity: str
    message: str


class CompileModel(BaseModel):
    success: bool
    diagnostics: list[DiagnosticModel]
    raw_output: str
    artifact_path: str | None


class UploadModel(BaseModel):
    success: bool
    port: str
    raw_output: str


class KnobModel(BaseModel):
    id: str
    name: str
    value: float
    text: str
    form: str
    span: list[int]
    suggested_min: float
    suggested_max: float
    suggested_step: float


class KnobManifestModel(BaseModel):
    sketch_version: str
    knobs: list[KnobModel]


class SessionModel(BaseModel):
    id: str
    manifest: ManifestBody
    conversation: list[MessageModel]
    loop: LoopModel
    sketch: SketchModel | None
    knobs: KnobManifestModel | None
    versions: list[str]
    selected_port: str | None
    last_compile: CompileModel | None
    last_upload: UploadModel | None


class SessionEnvelope(BaseModel):
    session: SessionModel


class ReplayEnvelope(BaseModel):
    session: SessionModel
    matches_live: bool


class KnobsEnvelope(BaseModel):
    knobs: KnobManifestModel


class PortModel(BaseModel):
    port: str
    hint: str | None


class PortsEnvelope(BaseModel):
    ports: list[PortModel]


class ModuleModel(BaseModel):
    id: str
    name: str
    part: str
    kind: str
    attachment: str
    summary: str
    library_hint: str | None


class CatalogModel(BaseModel):
    modules: list[ModuleModel]


class CatalogEnvelope(BaseModel):
    catalog: CatalogModel


def session_to_model(session: Session) -> SessionModel:
    manifest = session.manifest
    current = session.current
    state = session.loop_state
    last = state.last_result
    return SessionModel(
        id=session.id,
        manifest=ManifestBody(
            board=manifest.board,
            chain=list(manifest.chain),
            onboard_used=list(manifest.onboard_used),
            power=manifest.power,
            freeform_note=manifest.freeform_note,
        ),
        conversation=[
            MessageModel(role=m.role, content=m.content)
            for m in (session.conversation.messages if session.conversation else ())
        ],
        loop=LoopModel(status=state.status, iteration=state.iteration),
        sketch=(
            SketchModel(
                version=current.version,
                source=current.sketch.source,
                method=current.sketch.method,
                findings=[
                    FindingModel(severity=f.severity, code=f.code, message=f.message)
                    for f in current.sketch.findings
                ],
            )
            if current
            else None
        ),
        knobs=KnobManifestModel(**current.knobs.to_dict()) if current else None,
        versions=[v.version for v in session.sketch_versions],
        selected_port=session.selected_port,
        last_compile=(
            CompileModel(
                success=last.success,
                diagnostics=[DiagnosticModel(**d.to_dict()) for d in last.diagnostics],
                raw_output=last.raw_output,
                artifact_path=last.artifact_path,
            )
            if last
            else None
        ),
        last_upload=(
            UploadModel(
                success=session.last_upload.success,
                port=session.last_upload.port,
                raw_output=session.last_upload.raw_output,
            )
            if session.last_upload
            else None
        ),
    )


def catalog_to_model(catalog: Catalog) -> CatalogModel:
    return CatalogModel(
        modules=[
            ModuleModel(
                id=m.id,
                name=m.name,
                part=m.part,
                kind=m.kind,
                attachment=m.attachment,
                summary=m.summary,
                library_hint=m.library_hint,
            )
            for m in catalog.entries
        ]
    )
