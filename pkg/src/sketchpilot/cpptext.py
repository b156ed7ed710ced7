"""Lightweight lexical helpers for Arduino-dialect C++ source text.

This is not a parser. It only distinguishes code from comments and
string/char literals, which is all the structural gate and the knob
extractor need.
"""

from __future__ import annotations

_CODE = 0
_LINE_COMMENT = 1
_BLOCK_COMMENT = 2
_STRING = 3
_CHAR = 4


def mask_comments_and_strings(source: str) -> str:
    """Replace comment and string/char literal interiors with spaces.

    The result has exactly the same length and the same newline positions
    as the input, so regex match offsets computed on the masked text are
    valid offsets into the original. Delimiters themselves are masked too;
    only real code characters survive.

    Unterminated constructs are handled leniently: an open block comment
    masks to the end of input, an unclosed string or char literal masks to
    the end of its line (models frequently emit truncated code).
    """
    out = list(source)
    state = _CODE
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        nxt = source[i + 1] if i + 1 < n else ""
        if state == _CODE:
            if ch == "/" and nxt == "/":
                state = _LINE_COMMENT
                out[i] = out[i + 1] = " "
                i += 2
                continue
            if ch == "/" and nxt == "*":
                state = _BLOCK_COMMENT
                out[i] = out[i + 1] = " "
                i += 2
                continue
            if ch == '"':
                state = _STRING
                out[i] = " "
                i += 1
                continue
            if ch == "'":
                state = _CHAR
                out[i] = " "
                i += 1
                continue
            i += 1
            continue
        if state == _LINE_COMMENT:
            if ch == "\n":
                state = _CODE
            else:
                out[i] = " "
            i += 1
            continue
        if state == _BLOCK_COMMENT:
            if ch == "*" and nxt == "/":
                out[i] = out[i + 1] = " "
                state = _CODE
                i += 2
                continue
            if ch != "\n":
                out[i] = " "
            i += 1
            continue
        # string or char literal
        quote = '"' if state == _STRING else "'"
        if ch == "\\" and nxt:
            out[i] = " "
            if nxt != "\n":
                out[i + 1] = " "
            i += 2
            continue
        if ch == quote:
            out[i] = " "
            state = _CODE
            i += 1
            continue
        if ch == "\n":
            # unterminated literal: stop masking at end of line
            state = _CODE
            i += 1
            continue
        out[i] = " "
        i += 1
    return "".join(out)


def brace_balance(source: str) -> tuple[int, int]:
    """Count '{' and '}' outside comments and string/char literals."""
    masked = mask_comments_and_strings(source)
    return masked.count("{"), masked.count("}")


def byte_offset(text: str, char_index: int) -> int:
    """UTF-8 byte offset corresponding to a character index."""
    return len(text[:char_index].encode("utf-8"))
