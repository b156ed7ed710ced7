from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from sketchpilot.cli import build_parser, main
from sketchpilot.service import create_app
from sketchpilot.toolchain import MOCK_PORT

from conftest import BAD_SKETCH, GOOD_SKETCH, ScriptedProvider, fence, make_manager

MANIFEST = {"board": "DeneyapG", "chain": ["S5"], "onboard_used": ["A1"]}


@pytest.fixture
def env(tmp_path):
    """An in-process service client plus helpers the CLI tests share."""

    class Env:
        def __init__(self):
            self.manager = None
            self.client = None

        def start(self, provider, **loop_kwargs):
            self.manager = make_manager(tmp_path, provider, **loop_kwargs)
            self.client = TestClient(create_app(manager=self.manager), raise_server_exceptions=False)
            return self

        def run(self, *argv):
            return main(list(argv), client=self.client)

        def manifest_file(self):
            path = tmp_path / "manifest.json"
            path.write_text(json.dumps(MANIFEST))
            return str(path)

        def session_id(self):
            return self.manager.session_ids()[0]

    return Env()


def test_chat_creates_session_and_prints_sketch(env, capsys):
    env.start(ScriptedProvider([fence(GOOD_SKETCH)]))
    code = env.run("chat", "--manifest", env.manifest_file(), "--instruction", "blink the led")
    out = capsys.readouterr().out
    assert code == 0
    assert f"session: {env.session_id()}" in out
    assert "status: extracted (iteration 1)" in out
    assert "const int BLINK_MS = 500;" in out


def test_chat_continues_session(env, capsys):
    env.start(ScriptedProvider([fence(GOOD_SKETCH), fence(GOOD_SKETCH.replace("500", "100"))]))
    env.run("chat", "--manifest", env.manifest_file(), "--instruction", "blink")
    session_id = env.session_id()
    env.manager.compile_current(session_id)

    code = env.run("chat", "--session", session_id, "--instruction", "make it faster")
    out = capsys.readouterr().out
    assert code == 0
    assert "iteration 2" in out
    assert "BLINK_MS = 100" in out


def test_chat_requires_manifest_or_session(env, capsys):
    env.start(ScriptedProvider([]))
    code = env.run("chat", "--instruction", "blink")
    assert code == 1
    assert "either --manifest FILE or --session ID" in capsys.readouterr().err


def test_compile_command(env, capsys):
    env.start(ScriptedProvider([fence(GOOD_SKETCH)]))
    env.run("chat", "--manifest", env.manifest_file(), "--instruction", "blink")
    capsys.readouterr()

    code = env.run("compile", "--session", env.session_id())
    out = capsys.readouterr().out
    assert code == 0
    assert "status: succeeded" in out
    assert "compile: ok" in out
    assert "Mock compile" in out  # raw toolchain output flows through


def test_upload_command(env, capsys):
    env.start(ScriptedProvider([fence(GOOD_SKETCH)]))
    env.run("chat", "--manifest", env.manifest_file(), "--instruction", "blink")
    env.run("compile", "--session", env.session_id())
    capsys.readouterr()

    code = env.run("upload", "--session", env.session_id(), "--port", MOCK_PORT)
    out = capsys.readouterr().out
    assert code == 0
    assert f"upload to {MOCK_PORT}: ok" in out


def test_upload_failure_is_reported_not_crashed(env, capsys):
    env.start(ScriptedProvider([fence(GOOD_SKETCH)]))
    env.run("chat", "--manifest", env.manifest_file(), "--instruction", "blink")
    capsys.readouterr()

    code = env.run("upload", "--session", env.session_id(), "--port", "COM9")
    out = capsys.readouterr().out
    assert code == 0  # the HTTP call succeeded; the upload result is data
    assert "upload to COM9: failed" in out
    assert "unknown port" in out


def test_knobs_list_and_set(env, capsys):
    env.start(ScriptedProvider([fence(GOOD_SKETCH)]))
    env.run("chat", "--manifest", env.manifest_file(), "--instruction", "blink")
    capsys.readouterr()

    code = env.run("knobs", "list", "--session", env.session_id())
    out = capsys.readouterr().out
    assert code == 0
    assert "BLINK_MS: 500 [0 .. 1000, step 1]" in out.replace(".0", "")

    code = env.run("knobs", "set", "--session", env.session_id(), "--knob", "BLINK_MS", "--value", "250")
    out = capsys.readouterr().out
    assert code == 0
    assert "BLINK_MS set to 250.0; recompile and upload to apply" in out
    assert "status: extracted" in out


def test_knobs_set_requires_arguments(env, capsys):
    env.start(ScriptedProvider([fence(GOOD_SKETCH)]))
    env.run("chat", "--manifest", env.manifest_file(), "--instruction", "blink")
    capsys.readouterr()

    code = env.run("knobs", "set", "--session", env.session_id())
    assert code == 1
    assert "requires --knob ID --value NUMBER" in capsys.readouterr().err


def test_knobs_list_empty(env, capsys):
    bare = "void setup() {\n}\nvoid loop() {\n}"
    env.start(ScriptedProvider([fence(bare)]))
    env.run("chat", "--manifest", env.manifest_file(), "--instruction", "blink")
    capsys.readouterr()

    code = env.run("knobs", "list", "--session", env.session_id())
    assert code == 0
    assert "no knobs found" in capsys.readouterr().out


def test_replay_command_exit_codes(env, capsys):
    env.start(ScriptedProvider([fence(GOOD_SKETCH)]))
    env.run("chat", "--manifest", env.manifest_file(), "--instruction", "blink")
    env.run("compile", "--session", env.session_id())
    capsys.readouterr()

    code = env.run("replay", "--session", env.session_id())
    out = capsys.readouterr().out
    assert code == 0
    assert "replay matches live state: yes" in out


def test_service_errors_become_cli_errors(env, capsys):
    env.start(ScriptedProvider([]))
    code = env.run("compile", "--session", "zzz")
    err = capsys.readouterr().err
    assert code == 1
    assert "error: not-found:" in err


def test_invalid_manifest_error_surface(env, capsys):
    env.start(ScriptedProvider([]))
    path = env.manifest_file()
    with open(path, "w") as handle:
        json.dump({"board": "Nope"}, handle)
    code = env.run("chat", "--manifest", path, "--instruction", "blink")
    err = capsys.readouterr().err
    assert code == 1
    assert "invalid-manifest" in err


def test_unreachable_service(capsys):
    import httpx

    def refuse(request):
        raise httpx.ConnectError("connection refused")

    client = httpx.Client(transport=httpx.MockTransport(refuse), base_url="http://127.0.0.1:9")
    code = main(["compile", "--session", "x"], client=client)
    err = capsys.readouterr().err
    assert code == 1
    assert "cannot reach service" in err


def test_parser_defaults_and_serve_options():
    parser = build_parser()
    args = parser.parse_args(["serve", "--port", "9001", "--ui-dir", "/srv/ui"])
    assert args.command == "serve"
    assert args.port == 9001
    assert args.ui_dir == "/srv/ui"
    assert args.needs_client is False

    args = parser.parse_args(["--base-url", "http://box:8000", "compile", "--session", "s"])
    assert args.base_url == "http://box:8000"
    assert args.needs_client is True


def test_unknown_command_exits_with_usage():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["frobnicate"])
