"""Conversations and model providers.

Two providers speak the same contract: a live HTTP provider following the
chat-completion convention, and a record/replay provider that answers from
committed fixtures keyed by conversation digest. Everything above this
module is provider-agnostic, which is what makes the whole pipeline
testable at a desk with no credentials.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

SYSTEM_PROMPT = (
    "You are an expert Arduino programmer. "
    "Only return valid and complete Arduino code, without any explanations or comments."
)

ROLES = ("system", "user", "assistant")

DEFAULT_TIMEOUT = 60.0


class ProviderError(Exception):
    pass


class AuthenticationError(ProviderError):
    pass


class ProviderTimeout(ProviderError):
    pass


class RateLimited(ProviderError):
    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class ReplayMiss(ProviderError):
    def __init__(self, digest: str):
        super().__init__(f"no recorded response for conversation digest {digest}")
        self.digest = digest


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be non-empty")


@dataclass(frozen=True)
class Conversation:
    """Append-only message sequence: system first, then strict user/assistant turns."""

    messages: tuple[ChatMessage, ...]

    def __post_init__(self):
        if not self.messages:
            raise ValueError("conversation must contain at least the system message")
        if self.messages[0].role != "system":
            raise ValueError("first message must have role=system")
        for i, msg in enumerate(self.messages[1:]):
            expected = "user" if i % 2 == 0 else "assistant"
            if msg.role != expected:
                raise ValueError(f"message {i + 1} has role {msg.role!r}, expected {expected!r}")

    def append(self, message: ChatMessage) -> "Conversation":
        return Conversation(self.messages + (message,))

    @property
    def last(self) -> ChatMessage:
        return self.messages[-1]

    def __len__(self) -> int:
        return len(self.messages)


def build_system_prompt(context: str | None = None) -> ChatMessage:
    """System message, optionally grounded with a HARDWARE block."""
    content = SYSTEM_PROMPT
    if context:
        content += "\n\nHARDWARE:\n" + context
    return ChatMessage(role="system", content=content)


def conversation_digest(conversation: Conversation) -> str:
    """Stable hex digest over the ordered role/content pairs.

    Survives reformatting of fixture storage: only the message sequence
    matters, and the encoding is pinned (UTF-8, compact JSON).
    """
    payload = json.dumps(
        [[m.role, m.content] for m in conversation.messages],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ProviderConfig:
    kind: str  # "live" | "replay"
    endpoint: str | None = None
    credential_env: str | None = None
    model_name: str = "default"
    fixture_path: str | None = None
    timeout: float = DEFAULT_TIMEOUT
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == "live":
            if not self.endpoint or not self.credential_env:
                raise ValueError("live provider requires endpoint and credential_env")
        elif self.kind == "replay":
            if not self.fixture_path:
                raise ValueError("replay provider requires fixture_path")
        else:
            raise ValueError(f"unknown provider kind {self.kind!r}")


class Provider(Protocol):
    def complete(self, conversation: Conversation) -> ChatMessage: ...


class ReplayProvider:
    """Answers from a JSON Lines fixture of {digest, response_content} entries."""

    def __init__(self, fixture_path: str | Path):
        self.fixture_path = Path(fixture_path)
        self._entries = _read_fixture(self.fixture_path)

    def complete(self, conversation: Conversation) -> ChatMessage:
        digest = conversation_digest(conversation)
        try:
            content = self._entries[digest]
        except KeyError:
            raise ReplayMiss(digest) from None
        return ChatMessage(role="assistant", content=content)


class LiveProvider:
    """HTTP chat-completion client. Credentials come from the environment
    variable named in the config and are never persisted anywhere."""

    def __init__(self, config: ProviderConfig, client: httpx.Client | None = None):
        if config.kind != "live":
            raise ValueError("LiveProvider requires a live ProviderConfig")
        self.config = config
        self._client = client

    def complete(self, conversation: Conversation) -> ChatMessage:
        credential = os.environ.get(self.config.credential_env or "")
        if not credential:
            raise AuthenticationError(
                f"environment variable {self.config.credential_env!r} is not set"
            )
        body = {
            "model": self.config.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in conversation.messages],
        }
        body.update(self.config.params)
        headers = {"Authorization": f"Bearer {credential}"}

        attempts = 0
        while True:
            attempts += 1
            try:
                response = self._post(body, headers)
            except httpx.TimeoutException as exc:
                raise ProviderTimeout(f"provider call timed out after {self.config.timeout}s") from exc
            except httpx.HTTPError as exc:
                raise ProviderError(f"transport error: {exc}") from exc
            if response.status_code in (401, 403):
                raise AuthenticationError(f"provider rejected credentials (HTTP {response.status_code})")
            if response.status_code == 429:
                retry_after = _parse_retry_after(response)
                if attempts == 1:
                    time.sleep(retry_after if retry_after is not None else 1.0)
                    continue
                raise RateLimited("provider rate limit (after one retry)", retry_after)
            if response.status_code >= 400:
                raise ProviderError(f"provider error HTTP {response.status_code}: {response.text[:500]}")
            return _parse_completion(response)

    def _post(self, body: dict, headers: dict) -> httpx.Response:
        if self._client is not None:
            return self._client.post(
                self.config.endpoint, json=body, headers=headers, timeout=self.config.timeout
            )
        with httpx.Client(timeout=self.config.timeout) as client:
            return client.post(self.config.endpoint, json=body, headers=headers)


def _parse_retry_after(response: httpx.Response) -> float | None:
    value = response.headers.get("Retry-After")
    if value is None:
        return None
    try:
        return float(value)
    except ValueError:
        return None


def _parse_completion(response: httpx.Response) -> ChatMessage:
    try:
        data = response.json()
        content = data["choices"][0]["message"]["content"]
    except (ValueError, LookupError, TypeError) as exc:
        raise ProviderError(f"malformed provider response: {exc}") from exc
    if not isinstance(content, str) or not content:
        raise ProviderError("provider returned empty message content")
    return ChatMessage(role="assistant", content=content)


def make_provider(config: ProviderConfig, client: httpx.Client | None = None) -> Provider:
    if config.kind == "replay":
        return ReplayProvider(config.fixture_path)
    return LiveProvider(config, client=client)


def send(conversation: Conversation, config: ProviderConfig) -> ChatMessage:
    """One request/response exchange. The caller appends the reply."""
    if conversation.last.role != "user":
        raise ValueError("last message must have role=user before sending")
    return make_provider(config).complete(conversation)


def _read_fixture(path: Path) -> dict[str, str]:
    entries: dict[str, str] = {}
    if not path.exists():
        return entries
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                entries[record["digest"]] = record["response_content"]
            except (ValueError, KeyError, TypeError) as exc:
                raise ProviderError(f"{path}:{lineno}: bad fixture entry: {exc}") from exc
    return entries


def record_fixture(conversation: Conversation, response: ChatMessage, fixture_path: str | Path) -> None:
    """Store a digest-keyed response; identical re-records leave the file untouched."""
    if response.role != "assistant":
        raise ValueError("only assistant messages can be recorded")
    path = Path(fixture_path)
    entries = _read_fixture(path)
    digest = conversation_digest(conversation)
    if entries.get(digest) == response.content:
        return
    entries[digest] = response.content
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for key, content in entries.items():
            handle.write(json.dumps({"digest": key, "response_content": content}, ensure_ascii=False) + "\n")
