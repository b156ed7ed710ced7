"""Finds tunable numeric constants in a sketch and patches values in place.

Two shapes qualify: `#define NAME LIT` and `const TYPE NAME = LIT;`.
Literals are plain decimal (optional sign, optional f/F suffix); hex,
binary, and exponent forms are excluded to keep the grammar small.
Matching runs over comment/string-masked text so literals inside
comments or strings can never become knobs. Patching is textual and
byte-local, which preserves the model's formatting exactly.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

from .cpptext import mask_comments_and_strings

_LIT = r"[+-]?(?:\d+\.\d*|\.\d+|\d+)[fF]?(?![\w.])"

_DEFINE_RE = re.compile(
    r"^[ \t]*#[ \t]*define[ \t]+(?P<name>[A-Za-z_]\w*)[ \t]+(?P<lit>" + _LIT + r")[ \t]*\r?$",
    re.MULTILINE,
)

_CONST_RE = re.compile(
    r"\bconst\s+(?P<type>unsigned\s+int|int|long|float|double|uint8_t|uint16_t|uint32_t)"
    r"\s+(?P<name>[A-Za-z_]\w*)\s*=\s*(?P<lit>" + _LIT + r")\s*;"
)

_INT_TYPES = {"int", "long", "uint8_t", "uint16_t", "uint32_t"}


class KnobError(Exception):
    pass


class UnknownKnob(KnobError):
    pass


class StaleManifest(KnobError):
    """The sketch changed after this manifest was extracted."""


class KnobValueError(KnobError):
    """Requested value falls outside the widened exploration bound."""


@dataclass(frozen=True)
class Knob:
    id: str
    name: str
    value: float | int
    text: str  # literal exactly as written in the source
    form: str  # "define" | "const-decl"
    span: tuple[int, int]  # byte offsets of the literal
    is_float: bool
    suffix: str  # "", "f", or "F"
    suggested_min: float | int
    suggested_max: float | int
    suggested_step: float | int

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "value": self.value,
            "text": self.text,
            "form": self.form,
            "span": list(self.span),
            "suggested_min": self.suggested_min,
            "suggested_max": self.suggested_max,
            "suggested_step": self.suggested_step,
        }


@dataclass(frozen=True)
class KnobManifest:
    sketch_version: str
    knobs: tuple[Knob, ...]

    def get(self, knob_id: str) -> Knob:
        for knob in self.knobs:
            if knob.id == knob_id:
                return knob
        raise UnknownKnob(f"no knob with id {knob_id!r}")

    def to_dict(self) -> dict:
        return {
            "sketch_version": self.sketch_version,
            "knobs": [knob.to_dict() for knob in self.knobs],
        }


def sketch_version(source: str) -> str:
    return hashlib.sha256(source.encode("utf-8")).hexdigest()[:12]


def _parse_literal(text: str) -> tuple[float | int, bool, str]:
    suffix = ""
    body = text
    if body and body[-1] in "fF":
        suffix = body[-1]
        body = body[:-1]
    if "." in body or suffix:
        return float(body), True, suffix
    return int(body), False, suffix


def _ranges(value: float | int, is_float: bool):
    if value > 0:
        lo, hi = type(value)(0), 2 * value
    elif value < 0:
        lo, hi = 2 * value, type(value)(0)
    else:
        lo, hi = -1, 1
    step = max(abs(value) / 100, 0.01) if is_float else 1
    return lo, hi, step


def _byte_offset(source: str, char_index: int) -> int:
    return len(source[:char_index].encode("utf-8"))


def extract_knobs(source: str) -> KnobManifest:
    masked = mask_comments_and_strings(source)
    matches = sorted(
        list(_DEFINE_RE.finditer(masked)) + list(_CONST_RE.finditer(masked)),
        key=lambda m: m.start("lit"),
    )
    knobs: list[Knob] = []
    seen: dict[str, int] = {}
    for match in matches:
        name = match.group("name")
        text = match.group("lit")
        value, is_float, suffix = _parse_literal(text)
        lo, hi, step = _ranges(value, is_float)
        count = seen.get(name, 0) + 1
        seen[name] = count
        knobs.append(
            Knob(
                id=name if count == 1 else f"{name}#{count}",
                name=name,
                value=value,
                text=text,
                form="define" if match.re is _DEFINE_RE else "const-decl",
                span=(_byte_offset(source, match.start("lit")), _byte_offset(source, match.end("lit"))),
                is_float=is_float,
                suffix=suffix,
                suggested_min=lo,
                suggested_max=hi,
                suggested_step=step,
            )
        )
    return KnobManifest(sketch_version=sketch_version(source), knobs=tuple(knobs))


def _format_value(knob: Knob, new_value: float | int) -> str:
    if new_value == knob.value:
        return knob.text
    if not knob.is_float:
        if float(new_value) != int(new_value):
            raise KnobValueError(f"{knob.id} holds an integer; {new_value!r} is not integral")
        return str(int(new_value))
    text = repr(float(new_value))
    if "e" in text or "E" in text:
        text = format(float(new_value), ".17f").rstrip("0")
        if text.endswith("."):
            text += "0"
    if float(text) != float(new_value):
        raise KnobValueError(f"{new_value!r} has no plain decimal spelling")
    return text + knob.suffix


def patch_knob(
    source: str,
    manifest: KnobManifest,
    knob_id: str,
    new_value: float | int,
) -> tuple[str, KnobManifest]:
    knob = manifest.get(knob_id)
    if manifest.sketch_version != sketch_version(source):
        raise StaleManifest("manifest was extracted from a different sketch")
    raw = source.encode("utf-8")
    start, end = knob.span
    if raw[start:end].decode("utf-8", errors="replace") != knob.text:
        raise StaleManifest(f"bytes at {knob.span} no longer spell {knob.text!r}")
    width = abs(knob.suggested_max - knob.suggested_min)
    if not (knob.suggested_min - width <= new_value <= knob.suggested_max + width):
        raise KnobValueError(
            f"{new_value!r} outside [{knob.suggested_min - width}, {knob.suggested_max + width}] for {knob.id}"
        )
    replacement = _format_value(knob, new_value).encode("utf-8")
    new_source = (raw[:start] + replacement + raw[end:]).decode("utf-8")
    return new_source, extract_knobs(new_source)
