from __future__ import annotations

import hashlib
import json

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sketchpilot.llm import (
    SYSTEM_PROMPT,
    AuthenticationError,
    ChatMessage,
    Conversation,
    LiveProvider,
    ProviderConfig,
    ProviderError,
    ProviderTimeout,
    RateLimited,
    ReplayMiss,
    ReplayProvider,
    build_system_prompt,
    conversation_digest,
    make_provider,
    record_fixture,
    send,
)


def convo(*contents: str) -> Conversation:
    messages = [build_system_prompt()]
    for i, content in enumerate(contents):
        messages.append(ChatMessage(role="user" if i % 2 == 0 else "assistant", content=content))
    return Conversation(tuple(messages))


def test_system_prompt_exact_text():
    assert SYSTEM_PROMPT == (
        "You are an expert Arduino programmer. Only return valid and complete "
        "Arduino code, without any explanations or comments."
    )


def test_build_system_prompt_without_context():
    msg = build_system_prompt()
    assert msg.role == "system"
    assert msg.content == SYSTEM_PROMPT


def test_build_system_prompt_with_context():
    msg = build_system_prompt("Board: X")
    assert msg.content == SYSTEM_PROMPT + "\n\nHARDWARE:\nBoard: X"


def test_message_rejects_bad_role_and_empty_content():
    with pytest.raises(ValueError):
        ChatMessage(role="tool", content="x")
    with pytest.raises(ValueError):
        ChatMessage(role="user", content="")


def test_conversation_requires_system_first():
    with pytest.raises(ValueError):
        Conversation((ChatMessage(role="user", content="hi"),))
    with pytest.raises(ValueError):
        Conversation(())


def test_conversation_enforces_alternation():
    base = convo("hi", "hello")
    assert len(base) == 3
    with pytest.raises(ValueError):
        base.append(ChatMessage(role="assistant", content="again"))
    follow = base.append(ChatMessage(role="user", content="next"))
    assert follow.last.content == "next"
    # append is persistent, the original is untouched
    assert len(base) == 3


def test_digest_is_sha256_of_role_content_pairs():
    conversation = convo("merhaba ölçüm")
    payload = json.dumps(
        [[m.role, m.content] for m in conversation.messages],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    assert conversation_digest(conversation) == hashlib.sha256(payload.encode("utf-8")).hexdigest()


def test_digest_stable_and_order_sensitive():
    assert conversation_digest(convo("a", "b")) == conversation_digest(convo("a", "b"))
    assert conversation_digest(convo("a", "b")) != conversation_digest(convo("b", "a"))


def test_provider_config_validation():
    with pytest.raises(ValueError):
        ProviderConfig(kind="live")  # needs endpoint + credential_env
    with pytest.raises(ValueError):
        ProviderConfig(kind="replay")  # needs fixture_path
    with pytest.raises(ValueError):
        ProviderConfig(kind="psychic")
    ProviderConfig(kind="replay", fixture_path="f.jsonl")
    ProviderConfig(kind="live", endpoint="https://api.example/v1", credential_env="KEY")


def test_replay_provider_hit_and_miss(tmp_path):
    fixture = tmp_path / "fx.jsonl"
    conversation = convo("blink please")
    record_fixture(conversation, ChatMessage(role="assistant", content="code here"), fixture)

    provider = ReplayProvider(fixture)
    reply = provider.complete(conversation)
    assert reply == ChatMessage(role="assistant", content="code here")

    other = convo("different")
    with pytest.raises(ReplayMiss) as err:
        provider.complete(other)
    assert err.value.digest == conversation_digest(other)


def test_replay_provider_tolerates_missing_file(tmp_path):
    provider = ReplayProvider(tmp_path / "absent.jsonl")
    with pytest.raises(ReplayMiss):
        provider.complete(convo("hi"))


def test_record_fixture_idempotent(tmp_path):
    fixture = tmp_path / "fx.jsonl"
    conversation = convo("hello")
    reply = ChatMessage(role="assistant", content="hi")
    record_fixture(conversation, reply, fixture)
    first = fixture.read_bytes()
    record_fixture(conversation, reply, fixture)
    assert fixture.read_bytes() == first

    record_fixture(conversation, ChatMessage(role="assistant", content="changed"), fixture)
    assert ReplayProvider(fixture).complete(conversation).content == "changed"


def test_record_fixture_rejects_non_assistant(tmp_path):
    with pytest.raises(ValueError):
        record_fixture(convo("q"), ChatMessage(role="user", content="a"), tmp_path / "f.jsonl")


def test_bad_fixture_line_reports_position(tmp_path):
    fixture = tmp_path / "fx.jsonl"
    fixture.write_text('{"digest": "d", "response_content": "ok"}\nnot json\n')
    with pytest.raises(ProviderError, match=r":2:"):
        ReplayProvider(fixture)


def live_config(**overrides) -> ProviderConfig:
    base = dict(
        kind="live",
        endpoint="https://api.example/v1/chat/completions",
        credential_env="SKETCHPILOT_TEST_KEY",
        model_name="m1",
    )
    base.update(overrides)
    return ProviderConfig(**base)


def mock_provider(handler, monkeypatch, **overrides) -> LiveProvider:
    transport = httpx.MockTransport(handler)
    client = httpx.Client(transport=transport)
    monkeypatch.setenv("SKETCHPILOT_TEST_KEY", "sk-test")
    return LiveProvider(live_config(**overrides), client=client)


def completion_response(content: str) -> httpx.Response:
    return httpx.Response(200, json={"choices": [{"message": {"content": content}}]})


def test_live_requires_credential_before_network(monkeypatch):
    monkeypatch.delenv("SKETCHPILOT_TEST_KEY", raising=False)
    calls = []

    def handler(request):
        calls.append(request)
        return completion_response("x")

    provider = LiveProvider(live_config(), client=httpx.Client(transport=httpx.MockTransport(handler)))
    with pytest.raises(AuthenticationError, match="SKETCHPILOT_TEST_KEY"):
        provider.complete(convo("hi"))
    assert calls == []


def test_live_success_and_request_shape(monkeypatch):
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("Authorization")
        seen["body"] = json.loads(request.content)
        return completion_response("the code")

    provider = mock_provider(handler, monkeypatch, params={"temperature": 0.2})
    reply = provider.complete(convo("write it"))
    assert reply == ChatMessage(role="assistant", content="the code")
    assert seen["auth"] == "Bearer sk-test"
    assert seen["body"]["model"] == "m1"
    assert seen["body"]["temperature"] == 0.2
    assert seen["body"]["messages"][0] == {"role": "system", "content": SYSTEM_PROMPT}
    assert seen["body"]["messages"][1] == {"role": "user", "content": "write it"}


def test_live_auth_rejection(monkeypatch):
    provider = mock_provider(lambda request: httpx.Response(401, text="no"), monkeypatch)
    with pytest.raises(AuthenticationError, match="401"):
        provider.complete(convo("hi"))


def test_live_rate_limit_retries_once_then_raises(monkeypatch):
    sleeps = []
    monkeypatch.setattr("sketchpilot.llm.time.sleep", sleeps.append)
    attempts = []

    def always_429(request):
        attempts.append(1)
        return httpx.Response(429, headers={"Retry-After": "0.5"})

    provider = mock_provider(always_429, monkeypatch)
    with pytest.raises(RateLimited) as err:
        provider.complete(convo("hi"))
    assert len(attempts) == 2
    assert sleeps == [0.5]
    assert err.value.retry_after == 0.5


def test_live_rate_limit_retry_can_succeed(monkeypatch):
    monkeypatch.setattr("sketchpilot.llm.time.sleep", lambda _: None)
    replies = [httpx.Response(429), completion_response("after retry")]
    provider = mock_provider(lambda request: replies.pop(0), monkeypatch)
    assert provider.complete(convo("hi")).content == "after retry"


def test_live_timeout(monkeypatch):
    def handler(request):
        raise httpx.ReadTimeout("slow")

    provider = mock_provider(handler, monkeypatch)
    with pytest.raises(ProviderTimeout):
        provider.complete(convo("hi"))


def test_live_transport_error(monkeypatch):
    def handler(request):
        raise httpx.ConnectError("refused")

    provider = mock_provider(handler, monkeypatch)
    with pytest.raises(ProviderError, match="transport error"):
        provider.complete(convo("hi"))


def test_live_http_500(monkeypatch):
    provider = mock_provider(lambda request: httpx.Response(500, text="boom"), monkeypatch)
    with pytest.raises(ProviderError, match="HTTP 500"):
        provider.complete(convo("hi"))


def test_live_malformed_and_empty_payloads(monkeypatch):
    provider = mock_provider(lambda request: httpx.Response(200, json={"choices": []}), monkeypatch)
    with pytest.raises(ProviderError, match="malformed"):
        provider.complete(convo("hi"))

    provider = mock_provider(lambda request: completion_response(""), monkeypatch)
    with pytest.raises(ProviderError, match="empty"):
        provider.complete(convo("hi"))


def test_make_provider_dispatch(tmp_path):
    replay = make_provider(ProviderConfig(kind="replay", fixture_path=str(tmp_path / "f.jsonl")))
    assert isinstance(replay, ReplayProvider)
    live = make_provider(live_config())
    assert isinstance(live, LiveProvider)


def test_send_requires_trailing_user_message(tmp_path):
    config = ProviderConfig(kind="replay", fixture_path=str(tmp_path / "f.jsonl"))
    with pytest.raises(ValueError, match="role=user"):
        send(convo("q", "a"), config)


message_texts = st.text(min_size=1, max_size=50)


@given(st.lists(message_texts, min_size=1, max_size=6))
@settings(max_examples=200)
def test_digest_injective_under_concatenation_shifts(parts):
    # moving a character across a message boundary must change the digest
    conversation = convo(*parts)
    digest = conversation_digest(conversation)
    assert digest == conversation_digest(convo(*parts))
    if len(parts) >= 2 and len(parts[0]) >= 2:
        shifted = [parts[0][:-1], parts[0][-1] + parts[1], *parts[2:]]
        assert conversation_digest(convo(*shifted)) != digest


@given(st.text(min_size=1, max_size=200))
@settings(max_examples=100)
def test_record_then_replay_round_trip(tmp_path_factory, content):
    fixture = tmp_path_factory.mktemp("fx") / "f.jsonl"
    conversation = convo("prompt")
    record_fixture(conversation, ChatMessage(role="assistant", content=content), fixture)
    assert ReplayProvider(fixture).complete(conversation).content == content
