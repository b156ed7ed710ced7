"""Drives an external board toolchain (compile, upload, port discovery).

Commands are argument-vector templates with {sketch_dir}, {board_id},
{build_dir}, and {port} placeholders so the core stays vendor-portable;
the shipped defaults target arduino-cli. A deterministic mock kind keeps
every higher layer testable with no toolchain installed: mock compiles
fail exactly on lines containing the "#error" marker, and mock uploads
succeed only on port MOCK0.
"""

from __future__ import annotations

import re
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path

MOCK_PORT = "MOCK0"
MOCK_BOARD_HINT = "Mock Board"

DEFAULT_COMPILE_COMMAND = ("arduino-cli", "compile", "--fqbn", "{board_id}", "{sketch_dir}")
DEFAULT_UPLOAD_COMMAND = ("arduino-cli", "upload", "--fqbn", "{board_id}", "--port", "{port}", "{sketch_dir}")
DEFAULT_LIST_PORTS_COMMAND = ("arduino-cli", "board", "list")

_NAME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")

_DIAG_RE = re.compile(
    r"^(?P<file>.+?):(?P<line>\d+)(?::(?P<col>\d+))?:\s*(?P<sev>error|warning|note)\s*:\s*(?P<msg>.*)$",
    re.IGNORECASE,
)

_ARTIFACT_SUFFIXES = (".bin", ".hex", ".elf", ".uf2")


class ToolchainError(Exception):
    pass


class ToolchainNotFound(ToolchainError):
    pass


class ToolchainTimeout(ToolchainError):
    pass


@dataclass(frozen=True)
class ToolchainConfig:
    kind: str = "mock"  # "external" | "mock"
    compile_command: tuple[str, ...] = DEFAULT_COMPILE_COMMAND
    upload_command: tuple[str, ...] = DEFAULT_UPLOAD_COMMAND
    list_ports_command: tuple[str, ...] = DEFAULT_LIST_PORTS_COMMAND
    board_id: str = ""
    work_root: str = "work"
    timeout: float = 120.0

    def __post_init__(self):
        if self.kind not in ("external", "mock"):
            raise ValueError(f"unknown toolchain kind {self.kind!r}")
        if self.kind == "external":
            if not self.board_id:
                raise ValueError("external toolchain requires a board_id (no safe default exists)")
            joined = " ".join(self.compile_command)
            if "{sketch_dir}" not in joined:
                raise ValueError("compile_command must reference {sketch_dir}")
            joined = " ".join(self.upload_command)
            if "{sketch_dir}" not in joined or "{port}" not in joined:
                raise ValueError("upload_command must reference {sketch_dir} and {port}")


@dataclass(frozen=True)
class Diagnostic:
    file: str
    line: int
    column: int | None
    severity: str  # "error" | "warning" | "note" | "raw"
    message: str

    @classmethod
    def raw(cls, text: str) -> "Diagnostic":
        return cls(file="", line=0, column=None, severity="raw", message=text)

    def to_dict(self) -> dict:
        return {
            "file": self.file,
            "line": self.line,
            "column": self.column,
            "severity": self.severity,
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Diagnostic":
        return cls(
            file=data["file"],
            line=data["line"],
            column=data.get("column"),
            severity=data["severity"],
            message=data["message"],
        )


@dataclass(frozen=True)
class CompileResult:
    success: bool
    diagnostics: tuple[Diagnostic, ...]
    raw_output: str
    artifact_path: str | None = None

    @property
    def errors(self) -> tuple[Diagnostic, ...]:
        return tuple(d for d in self.diagnostics if d.severity == "error")


@dataclass(frozen=True)
class UploadResult:
    success: bool
    port: str
    raw_output: str


def prepare_sketch_dir(sketch, name: str, work_root: str | Path) -> Path:
    """Lay out {work_root}/{name}/{name}.ino as the toolchain convention requires."""
    if not _NAME_RE.match(name):
        raise ValueError(f"sketch name {name!r} must match [A-Za-z][A-Za-z0-9_]*")
    source = sketch.source if hasattr(sketch, "source") else str(sketch)
    sketch_dir = Path(work_root) / name
    sketch_dir.mkdir(parents=True, exist_ok=True)
    (sketch_dir / f"{name}.ino").write_text(source, encoding="utf-8")
    return sketch_dir


def parse_diagnostics(raw_output: str) -> list[Diagnostic]:
    """Structure GCC-convention `file:line[:col]: severity: message` lines.

    Non-matching, non-empty lines directly after a structured diagnostic
    are treated as its continuation (source excerpts, caret markers); any
    other non-empty line is preserved verbatim as severity=raw. Nothing is
    ever dropped.
    """
    diagnostics: list[Diagnostic] = []
    pending: dict | None = None  # fields of the diagnostic currently absorbing continuations

    def flush():
        nonlocal pending
        if pending is not None:
            diagnostics.append(
                Diagnostic(
                    file=pending["file"],
                    line=pending["line"],
                    column=pending["column"],
                    severity=pending["severity"],
                    message="\n".join(pending["parts"]),
                )
            )
            pending = None

    for line in raw_output.splitlines():
        match = _DIAG_RE.match(line)
        if match:
            flush()
            pending = {
                "file": match.group("file"),
                "line": int(match.group("line")),
                "column": int(match.group("col")) if match.group("col") else None,
                "severity": match.group("sev").lower(),
                "parts": [match.group("msg")],
            }
            continue
        if not line.strip():
            flush()
            continue
        if pending is not None:
            pending["parts"].append(line)
            continue
        diagnostics.append(Diagnostic.raw(line))
    flush()
    return diagnostics


def _substitute(template: tuple[str, ...], values: dict[str, str]) -> list[str]:
    argv = []
    for arg in template:
        for key, value in values.items():
            arg = arg.replace("{" + key + "}", value)
        argv.append(arg)
    return argv


def _run(argv: list[str], timeout: float) -> tuple[int, str]:
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
    except FileNotFoundError as exc:
        raise ToolchainNotFound(f"toolchain command not found: {argv[0]}") from exc
    except subprocess.TimeoutExpired as exc:
        raise ToolchainTimeout(f"{argv[0]} exceeded {timeout}s") from exc
    output = proc.stdout
    if proc.stderr:
        output = output + ("\n" if output and not output.endswith("\n") else "") + proc.stderr
    return proc.returncode, output


def _find_artifact(*roots: Path) -> str | None:
    for root in roots:
        if not root.is_dir():
            continue
        hits = sorted(p for p in root.rglob("*") if p.suffix in _ARTIFACT_SUFFIXES)
        if hits:
            return str(hits[0])
    return None


def compile_sketch(sketch_dir: str | Path, config: ToolchainConfig) -> CompileResult:
    sketch_dir = Path(sketch_dir)
    if config.kind == "mock":
        return _mock_compile(sketch_dir)
    build_dir = Path(config.work_root) / ".build" / sketch_dir.name
    argv = _substitute(
        config.compile_command,
        {"sketch_dir": str(sketch_dir), "board_id": config.board_id, "build_dir": str(build_dir)},
    )
    if any("{build_dir}" in arg for arg in config.compile_command):
        build_dir.mkdir(parents=True, exist_ok=True)
    returncode, output = _run(argv, config.timeout)
    success = returncode == 0
    artifact = None
    if success:
        # The vendor CLI may keep binaries in its own cache; fall back to the
        # sketch dir as the build workspace so success always yields a path.
        artifact = _find_artifact(build_dir, sketch_dir) or str(sketch_dir)
    return CompileResult(
        success=success,
        diagnostics=tuple(parse_diagnostics(output)),
        raw_output=output,
        artifact_path=artifact,
    )


def _mock_compile(sketch_dir: Path) -> CompileResult:
    ino = sketch_dir / f"{sketch_dir.name}.ino"
    source = ino.read_text(encoding="utf-8")
    error_lines = [
        (number, line.strip())
        for number, line in enumerate(source.splitlines(), start=1)
        if "#error" in line
    ]
    if not error_lines:
        raw = f"Mock compile of {ino} finished.\nSketch uses {len(source)} bytes.\n"
        return CompileResult(success=True, diagnostics=(), raw_output=raw, artifact_path=None)
    raw = "".join(f"{ino}:{number}:2: error: {text}\n" for number, text in error_lines)
    # blank line: keeps the trailer from reading as a continuation of the last diagnostic
    raw += f"\nMock compile of {ino} failed.\n"
    return CompileResult(
        success=False,
        diagnostics=tuple(parse_diagnostics(raw)),
        raw_output=raw,
        artifact_path=None,
    )


def list_ports(config: ToolchainConfig) -> list[tuple[str, str | None]]:
    if config.kind == "mock":
        return [(MOCK_PORT, MOCK_BOARD_HINT)]
    argv = _substitute(tuple(config.list_ports_command), {"board_id": config.board_id})
    _, output = _run(argv, config.timeout)
    ports: list[tuple[str, str | None]] = []
    for line in output.splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split(None, 1)
        ports.append((parts[0], parts[1].strip() if len(parts) > 1 else None))
    return ports


class PortLeases:
    """At most one in-flight upload per port; leases are process-wide."""

    def __init__(self):
        self._guard = threading.Lock()
        self._held: set[str] = set()

    def try_acquire(self, port: str) -> bool:
        with self._guard:
            if port in self._held:
                return False
            self._held.add(port)
            return True

    def release(self, port: str) -> None:
        with self._guard:
            self._held.discard(port)


_default_leases = PortLeases()


def upload_sketch(
    sketch_dir: str | Path,
    port: str,
    config: ToolchainConfig,
    leases: PortLeases | None = None,
) -> UploadResult:
    leases = leases if leases is not None else _default_leases
    if not leases.try_acquire(port):
        return UploadResult(success=False, port=port, raw_output=f"port {port} is busy: another upload is in flight")
    try:
        if config.kind == "mock":
            if port == MOCK_PORT:
                return UploadResult(success=True, port=port, raw_output=f"Mock upload to {port} complete.\n")
            return UploadResult(success=False, port=port, raw_output=f"error: unknown port {port}\n")
        argv = _substitute(
            tuple(config.upload_command),
            {"sketch_dir": str(Path(sketch_dir)), "board_id": config.board_id, "port": port},
        )
        returncode, output = _run(argv, config.timeout)
        return UploadResult(success=returncode == 0, port=port, raw_output=output)
    finally:
        leases.release(port)
