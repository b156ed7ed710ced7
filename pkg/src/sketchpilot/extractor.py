"""Pulls a single compilable sketch out of an assistant chat message.

Model replies are supposed to be bare Arduino code, but in practice they
arrive wrapped in markdown fences, surrounded by prose, or truncated.
The selection rule here is deliberately dumb and total: it never parses
C++, it only looks for fenced blocks and the setup()/loop() entry points.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .cpptext import brace_balance, byte_offset, mask_comments_and_strings

SETUP_RE = re.compile(r"void\s+setup\s*\(")
LOOP_RE = re.compile(r"void\s+loop\s*\(")

_FENCE_OPEN_RE = re.compile(r"^\s*```(.*)$")
_FENCE_CLOSE_RE = re.compile(r"^\s*```\s*$")
_EMPTY_BODY_RE = re.compile(r"void\s+(setup|loop)\s*\([^)]*\)\s*\{\s*\}")


class NoCodeFound(Exception):
    """The message contains no recognizable sketch."""


@dataclass(frozen=True)
class StructuralFinding:
    severity: str  # "error" | "warning"
    code: str
    message: str


@dataclass(frozen=True)
class GeneratedSketch:
    source: str
    method: str  # "fenced" | "whole-response" | "patched"
    origin_span: tuple[int, int]  # byte offsets into the originating message
    findings: tuple[StructuralFinding, ...] = field(default_factory=tuple)

    @property
    def has_errors(self) -> bool:
        return any(f.severity == "error" for f in self.findings)


@dataclass(frozen=True)
class _Fence:
    body: str
    char_span: tuple[int, int]
    terminated: bool


def _scan_fences(text: str) -> list[_Fence]:
    """Collect triple-backtick fenced blocks, tolerating an unterminated tail."""
    fences: list[_Fence] = []
    lines = text.splitlines(keepends=True)
    pos = 0
    open_start: int | None = None
    for line in lines:
        stripped = line.rstrip("\n")
        if open_start is None:
            if _FENCE_OPEN_RE.match(stripped):
                open_start = pos + len(line)  # body starts after the opener line
        else:
            if _FENCE_CLOSE_RE.match(stripped):
                body_end = max(open_start, pos - 1)  # drop newline before the closer
                fences.append(_Fence(text[open_start:body_end], (open_start, body_end), True))
                open_start = None
        pos += len(line)
    if open_start is not None:
        # Truncated response: treat everything after the opener as the body.
        fences.append(_Fence(text[open_start:], (open_start, len(text)), False))
    return fences


def _has_entry_points(code: str) -> bool:
    return bool(SETUP_RE.search(code)) and bool(LOOP_RE.search(code))


def extract_sketch(response: str) -> GeneratedSketch:
    """Select the sketch from a model reply.

    Selection order: fenced blocks containing both setup() and loop()
    definitions win (longest if several); with no fences at all, a bare
    reply containing both definitions is taken whole. Anything else raises
    NoCodeFound.
    """
    fences = _scan_fences(response)
    if fences:
        candidates = [f for f in fences if _has_entry_points(f.body)]
        if not candidates:
            raise NoCodeFound("no fenced block defines both setup() and loop()")
        best = max(candidates, key=lambda f: len(f.body))
        start, end = best.char_span
        findings = list(validate_structure(best.body))
        if not best.terminated:
            findings.append(
                StructuralFinding("warning", "unterminated-fence", "code fence never closed; used message tail")
            )
        return GeneratedSketch(
            source=best.body,
            method="fenced",
            origin_span=(byte_offset(response, start), byte_offset(response, end)),
            findings=tuple(findings),
        )
    trimmed = response.strip()
    if trimmed and _has_entry_points(trimmed):
        start = response.find(trimmed)
        end = start + len(trimmed)
        return GeneratedSketch(
            source=trimmed,
            method="whole-response",
            origin_span=(byte_offset(response, start), byte_offset(response, end)),
            findings=tuple(validate_structure(trimmed)),
        )
    raise NoCodeFound("response contains no sketch with setup() and loop()")


def validate_structure(source: str | GeneratedSketch) -> list[StructuralFinding]:
    """Cheap pre-compile sanity checks; clean output means plausible, not compilable."""
    code = source.source if isinstance(source, GeneratedSketch) else source
    findings: list[StructuralFinding] = []
    masked = mask_comments_and_strings(code)
    if not SETUP_RE.search(masked):
        findings.append(StructuralFinding("error", "missing-setup", "no setup() definition found"))
    if not LOOP_RE.search(masked):
        findings.append(StructuralFinding("error", "missing-loop", "no loop() definition found"))
    opens, closes = brace_balance(code)
    if opens != closes:
        findings.append(
            StructuralFinding(
                "error",
                "unbalanced-braces",
                f"{opens} '{{' vs {closes} '}}' outside comments and literals",
            )
        )
    for match in _EMPTY_BODY_RE.finditer(masked):
        findings.append(
            StructuralFinding("warning", "empty-body", f"{match.group(1)}() has an empty body")
        )
    return findings
