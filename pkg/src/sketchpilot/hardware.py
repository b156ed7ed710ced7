"""Catalog of supported boards/modules and validation of user hardware manifests.

The catalog is data, not code: a line-oriented ``key: value`` document with
records separated by blank lines (see ``data/default.cat``). Validated
manifests render to a canonical text block that grounds the model prompt,
so every user of the same kit sends the model the same hardware facts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

KINDS = frozenset({"sensor", "actuator", "main", "power"})
ATTACHMENTS = frozenset({"i2c-chain", "onboard", "power-rail"})

_FIELDS = ("id", "name", "part", "kind", "attachment", "summary", "library_hint")
_REQUIRED = ("id", "name", "part", "kind", "attachment", "summary")

MAX_NOTE_LENGTH = 500


class CatalogError(Exception):
    pass


class CatalogParseError(CatalogError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CatalogSchemaError(CatalogError):
    pass


class ManifestInvalid(Exception):
    """Raised when an operation requires a valid manifest but got findings."""

    def __init__(self, report: "ValidationReport"):
        super().__init__("; ".join(f"{f.code}: {f.message}" for f in report.findings) or "invalid manifest")
        self.report = report


@dataclass(frozen=True)
class ModuleSpec:
    id: str
    name: str
    part: str
    kind: str
    attachment: str
    summary: str
    library_hint: str | None = None


@dataclass(frozen=True)
class Catalog:
    entries: tuple[ModuleSpec, ...]

    def __post_init__(self):
        seen: set[str] = set()
        for entry in self.entries:
            if entry.id in seen:
                raise CatalogSchemaError(f"duplicate module id {entry.id!r}")
            seen.add(entry.id)

    def get(self, module_id: str) -> ModuleSpec | None:
        for entry in self.entries:
            if entry.id == module_id:
                return entry
        return None

    def __contains__(self, module_id: str) -> bool:
        return self.get(module_id) is not None

    def onboard_peripherals(self) -> tuple[ModuleSpec, ...]:
        """Modules that live on the main board rather than on the I2C chain."""
        return tuple(e for e in self.entries if e.attachment == "onboard" and e.kind != "main")


@dataclass(frozen=True)
class HardwareManifest:
    board: str
    chain: tuple[str, ...] = ()
    onboard_used: tuple[str, ...] = ()
    power: str | None = None
    freeform_note: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "HardwareManifest":
        return cls(
            board=str(data.get("board", "")),
            chain=tuple(str(x) for x in data.get("chain", ())),
            onboard_used=tuple(str(x) for x in data.get("onboard_used", ())),
            power=data.get("power"),
            freeform_note=data.get("freeform_note"),
        )

    def to_dict(self) -> dict:
        return {
            "board": self.board,
            "chain": list(self.chain),
            "onboard_used": list(self.onboard_used),
            "power": self.power,
            "freeform_note": self.freeform_note,
        }


@dataclass(frozen=True)
class ValidationFinding:
    severity: str  # "error" | "warning"
    code: str
    message: str
    offending_id: str | None = None


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[ValidationFinding, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not any(f.severity == "error" for f in self.findings)


def load_catalog(source: str) -> Catalog:
    """Parse a catalog document. Malformed lines raise CatalogParseError with
    the offending line number; structural violations raise CatalogSchemaError."""
    entries: list[ModuleSpec] = []
    record: dict[str, str] = {}
    record_line = 0

    def finish(at_line: int):
        nonlocal record
        if not record:
            return
        missing = [f for f in _REQUIRED if f not in record]
        if missing:
            raise CatalogSchemaError(
                f"record starting near line {record_line} is missing field(s): {', '.join(missing)}"
            )
        if record["kind"] not in KINDS:
            raise CatalogSchemaError(f"unknown kind {record['kind']!r} for id {record['id']!r}")
        if record["attachment"] not in ATTACHMENTS:
            raise CatalogSchemaError(f"unknown attachment {record['attachment']!r} for id {record['id']!r}")
        entries.append(
            ModuleSpec(
                id=record["id"],
                name=record["name"],
                part=record["part"],
                kind=record["kind"],
                attachment=record["attachment"],
                summary=record["summary"],
                library_hint=record.get("library_hint") or None,
            )
        )
        record = {}

    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.rstrip()
        if not line.strip():
            finish(lineno)
            continue
        if ":" not in line:
            raise CatalogParseError(f"expected 'key: value', got {line!r}", lineno)
        key, _, value = line.partition(":")
        key = key.strip()
        value = value.strip()
        if key not in _FIELDS:
            raise CatalogParseError(f"unknown field {key!r}", lineno)
        if not record:
            record_line = lineno
        if key in record:
            raise CatalogParseError(f"field {key!r} repeated within one record", lineno)
        record[key] = value
    finish(len(source.splitlines()) + 1)

    duplicates = {e.id for e in entries if sum(1 for x in entries if x.id == e.id) > 1}
    if duplicates:
        raise CatalogSchemaError(f"duplicate module id(s): {', '.join(sorted(duplicates))}")
    return Catalog(entries=tuple(entries))


def serialize_catalog(catalog: Catalog) -> str:
    """Render a catalog back to the document format (round-trip safe)."""
    blocks = []
    for entry in catalog.entries:
        lines = [
            f"id: {entry.id}",
            f"name: {entry.name}",
            f"part: {entry.part}",
            f"kind: {entry.kind}",
            f"attachment: {entry.attachment}",
            f"summary: {entry.summary}",
        ]
        if entry.library_hint:
            lines.append(f"library_hint: {entry.library_hint}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def load_default_catalog() -> Catalog:
    text = resources.files("sketchpilot").joinpath("data/default.cat").read_text(encoding="utf-8")
    return load_catalog(text)


def validate_manifest(manifest: HardwareManifest, catalog: Catalog) -> ValidationReport:
    """Check every manifest invariant; never raises, reports instead."""
    findings: list[ValidationFinding] = []

    board = catalog.get(manifest.board)
    if board is None:
        findings.append(
            ValidationFinding("error", "unknown-board", f"board {manifest.board!r} is not in the catalog", manifest.board)
        )
    elif board.kind != "main":
        findings.append(
            ValidationFinding("error", "board-not-main", f"{manifest.board!r} has kind {board.kind!r}, expected main", manifest.board)
        )

    seen_chain: set[str] = set()
    for position, module_id in enumerate(manifest.chain, start=1):
        spec = catalog.get(module_id)
        if spec is None:
            findings.append(
                ValidationFinding("error", "unknown-module", f"chain position {position}: {module_id!r} is not in the catalog", module_id)
            )
        elif spec.attachment != "i2c-chain":
            findings.append(
                ValidationFinding("error", "not-chainable", f"chain position {position}: {module_id!r} attaches via {spec.attachment!r}, not the I2C chain", module_id)
            )
        if module_id in seen_chain:
            findings.append(
                ValidationFinding("error", "duplicate-module", f"{module_id!r} appears more than once in the chain", module_id)
            )
        seen_chain.add(module_id)

    valid_onboard = {e.id for e in catalog.onboard_peripherals()}
    seen_onboard: set[str] = set()
    for module_id in manifest.onboard_used:
        if module_id not in catalog:
            findings.append(
                ValidationFinding("error", "unknown-peripheral", f"onboard peripheral {module_id!r} is not in the catalog", module_id)
            )
        elif module_id not in valid_onboard:
            findings.append(
                ValidationFinding("error", "not-onboard", f"{module_id!r} is not an onboard peripheral", module_id)
            )
        if module_id in seen_onboard:
            findings.append(
                ValidationFinding("error", "duplicate-module", f"{module_id!r} appears more than once in onboard_used", module_id)
            )
        seen_onboard.add(module_id)

    if manifest.power is not None:
        power = catalog.get(manifest.power)
        if power is None:
            findings.append(
                ValidationFinding("error", "unknown-module", f"power module {manifest.power!r} is not in the catalog", manifest.power)
            )
        elif power.kind != "power":
            findings.append(
                ValidationFinding("error", "not-power", f"{manifest.power!r} has kind {power.kind!r}, expected power", manifest.power)
            )

    if manifest.freeform_note is not None and len(manifest.freeform_note) > MAX_NOTE_LENGTH:
        findings.append(
            ValidationFinding("error", "note-too-long", f"freeform note exceeds {MAX_NOTE_LENGTH} characters")
        )

    return ValidationReport(findings=tuple(findings))


def manifest_to_prompt_context(manifest: HardwareManifest, catalog: Catalog) -> str:
    """Canonical textual rendering of the hardware for the model prompt.

    Pure: identical manifests yield byte-identical text. A manifest with an
    empty chain, no peripherals, no power, and no note renders to exactly
    the board line.
    """
    report = validate_manifest(manifest, catalog)
    if not report.ok:
        raise ManifestInvalid(report)

    board = catalog.get(manifest.board)
    assert board is not None
    lines = [f"Board: {board.name} (part: {board.part}, id: {board.id})"]
    for position, module_id in enumerate(manifest.chain, start=1):
        spec = catalog.get(module_id)
        assert spec is not None
        line = f"Module {position}: {spec.id} {spec.name} (part: {spec.part})"
        if spec.library_hint:
            line += f", library: {spec.library_hint}"
        lines.append(line)
    for module_id in manifest.onboard_used:
        spec = catalog.get(module_id)
        assert spec is not None
        lines.append(f"Onboard: {spec.id} {spec.name} (part: {spec.part})")
    if manifest.power is not None:
        spec = catalog.get(manifest.power)
        assert spec is not None
        lines.append(f"Power: {spec.id} {spec.name} (part: {spec.part})")
    if manifest.freeform_note:
        lines.append(f"Note: {manifest.freeform_note}")
    return "\n".join(lines)
