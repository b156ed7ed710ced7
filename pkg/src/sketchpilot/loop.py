"""State machine for the generate -> compile -> feed-errors-back repair cycle.

Transitions are pure: each operation takes a state and returns a new one,
so a session can be replayed deterministically from its event log. The
per-cycle budget counts model calls, which bounds the loop even when the
model keeps answering without code.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .extractor import GeneratedSketch, NoCodeFound, extract_sketch
from .llm import ChatMessage, Conversation, build_system_prompt
from .toolchain import CompileResult

CORRECTIVE_MESSAGE = "Return only complete code."
DIAGNOSTICS_HEADER = "The code failed to compile with these errors:"
DIAGNOSTICS_FOOTER = "Return the corrected, complete code only."
MAX_RENDERED_ERRORS = 10
MAX_RAW_TAIL_LINES = 20

TERMINAL_STATUSES = frozenset({"succeeded", "failed-final"})
STATUSES = frozenset(
    {
        "idle",
        "awaiting-model",
        "extracted",
        "compiling",
        "failed-compile",
        "succeeded",
        "failed-final",
        "awaiting-user",
    }
)


class LoopError(Exception):
    pass


class InvalidTransition(LoopError):
    """Raised when an event does not apply in the current status; the

    caller's state object is untouched (transitions are pure)."""


@dataclass(frozen=True)
class LoopPolicy:
    max_auto_iterations: int = 3
    auto_repair: bool = True

    def __post_init__(self):
        if self.max_auto_iterations < 1:
            raise ValueError("max_auto_iterations must be >= 1")


@dataclass(frozen=True)
class LoopState:
    status: str = "idle"
    iteration: int = 0  # accepted code replies, never resets
    cycle_calls: int = 0  # model calls spent in the current instruction cycle
    current_sketch: GeneratedSketch | None = None
    last_result: CompileResult | None = None
    pending_user_message: ChatMessage | None = None
    policy: LoopPolicy = field(default_factory=LoopPolicy)

    @property
    def terminal(self) -> bool:
        return self.status in TERMINAL_STATUSES


def _require(state: LoopState, *statuses: str) -> None:
    if state.status not in statuses:
        raise InvalidTransition(f"event not applicable in status {state.status!r} (needs {'/'.join(statuses)})")


def start(instruction: str, manifest_context: str, policy: LoopPolicy | None = None) -> tuple[LoopState, Conversation]:
    if not instruction.strip():
        raise ValueError("instruction must be non-empty")
    policy = policy or LoopPolicy()
    conversation = Conversation(
        (
            build_system_prompt(manifest_context),
            ChatMessage(role="user", content=instruction),
        )
    )
    return LoopState(status="awaiting-model", policy=policy), conversation


def begin_new_cycle(state: LoopState, instruction: str) -> LoopState:
    """A fresh user instruction opens a new cycle with a fresh call budget."""
    if not instruction.strip():
        raise ValueError("instruction must be non-empty")
    _require(state, "extracted", "failed-compile", "succeeded", "failed-final", "awaiting-user")
    return replace(state, status="awaiting-model", cycle_calls=0, pending_user_message=None)


def on_model_reply(state: LoopState, reply: ChatMessage) -> LoopState:
    if state.terminal:
        raise InvalidTransition(f"loop already {state.status}")
    _require(state, "awaiting-model")
    if reply.role != "assistant":
        raise ValueError("reply must have role=assistant")
    calls = state.cycle_calls + 1
    try:
        sketch = extract_sketch(reply.content)
    except NoCodeFound:
        if calls >= state.policy.max_auto_iterations:
            return replace(state, status="failed-final", cycle_calls=calls, pending_user_message=None)
        return replace(
            state,
            cycle_calls=calls,
            pending_user_message=ChatMessage(role="user", content=CORRECTIVE_MESSAGE),
        )
    return replace(
        state,
        status="extracted",
        iteration=state.iteration + 1,
        cycle_calls=calls,
        current_sketch=sketch,
        pending_user_message=None,
    )


def begin_compile(state: LoopState) -> LoopState:
    if state.terminal:
        raise InvalidTransition(f"loop already {state.status}")
    _require(state, "extracted")
    if state.current_sketch is None:
        raise InvalidTransition("no sketch to compile")
    return replace(state, status="compiling")


def on_compile_result(state: LoopState, result: CompileResult, policy: LoopPolicy | None = None) -> LoopState:
    if state.terminal:
        raise InvalidTransition(f"loop already {state.status}")
    _require(state, "compiling")
    policy = policy or state.policy
    if result.success:
        return replace(state, status="succeeded", last_result=result, pending_user_message=None)
    if not policy.auto_repair:
        return replace(state, status="awaiting-user", last_result=result, pending_user_message=None)
    if state.cycle_calls >= policy.max_auto_iterations:
        return replace(state, status="failed-final", last_result=result, pending_user_message=None)
    return replace(
        state,
        status="awaiting-model",
        last_result=result,
        pending_user_message=diagnostics_to_prompt(result),
    )


def with_patched_sketch(state: LoopState, sketch: GeneratedSketch) -> LoopState:
    """A knob patch replaces the current sketch with a new, uncompiled one.

    This deliberately leaves terminal statuses: tuning happens after a
    successful run, and the patched sketch must be compilable again."""
    _require(state, "extracted", "failed-compile", "succeeded", "failed-final", "awaiting-user")
    if state.current_sketch is None:
        raise InvalidTransition("no sketch to patch")
    return replace(
        state,
        status="extracted",
        current_sketch=sketch,
        last_result=None,
        pending_user_message=None,
    )


def diagnostics_to_prompt(result: CompileResult) -> ChatMessage:
    if result.success:
        raise ValueError("diagnostics_to_prompt requires a failed result")
    lines = [DIAGNOSTICS_HEADER]
    errors = result.errors
    if errors:
        for diagnostic in errors[:MAX_RENDERED_ERRORS]:
            lines.append(f"line {diagnostic.line}: {diagnostic.message}")
        overflow = len(errors) - MAX_RENDERED_ERRORS
        if overflow > 0:
            lines.append(f"…and {overflow} more errors.")
    else:
        lines.extend(result.raw_output.splitlines()[-MAX_RAW_TAIL_LINES:])
    lines.append(DIAGNOSTICS_FOOTER)
    return ChatMessage(role="user", content="\n".join(lines))
