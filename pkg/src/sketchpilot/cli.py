"""Command-line client for the service, plus the `serve` entry point.

Every subcommand except `serve` talks to a running service over HTTP;
none of them import session internals. Tests inject an in-process client
through `main(argv, client=...)`.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

DEFAULT_BASE_URL = "http://127.0.0.1:8000"


class CliError(Exception):
    pass


def _request(client: httpx.Client, method: str, url: str, **kwargs) -> dict:
    try:
        response = client.request(method, url, **kwargs)
    except httpx.HTTPError as exc:
        raise CliError(f"cannot reach service: {exc}") from exc
    if response.status_code >= 400:
        try:
            error = response.json()["error"]
            raise CliError(f"{error['code']}: {error['message']}")
        except (KeyError, ValueError):
            raise CliError(f"HTTP {response.status_code}: {response.text[:200]}") from None
    return response.json()


def _print_session(session: dict, *, show_sketch: bool = False) -> None:
    loop = session["loop"]
    print(f"session: {session['id']}")
    print(f"status: {loop['status']} (iteration {loop['iteration']})")
    if session.get("last_compile"):
        result = session["last_compile"]
        print(f"compile: {'ok' if result['success'] else 'failed'}")
        if result["raw_output"]:
            print(result["raw_output"].rstrip("\n"))
    if session.get("last_upload"):
        result = session["last_upload"]
        print(f"upload to {result['port']}: {'ok' if result['success'] else 'failed'}")
        if result["raw_output"]:
            print(result["raw_output"].rstrip("\n"))
    if show_sketch and session.get("sketch"):
        sketch = session["sketch"]
        print(f"--- sketch {sketch['version']} ({sketch['method']}) ---")
        print(sketch["source"])


def _cmd_serve(args: argparse.Namespace, client: httpx.Client | None) -> int:
    import uvicorn

    from .config import default_config, load_config
    from .service import create_app

    config = load_config(args.config) if args.config else default_config()
    app = create_app(config, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _cmd_chat(args: argparse.Namespace, client: httpx.Client) -> int:
    if args.session:
        session_id = args.session
    else:
        if not args.manifest:
            raise CliError("either --manifest FILE or --session ID is required")
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        created = _request(client, "POST", "/api/sessions", json={"manifest": manifest})
        session_id = created["session"]["id"]
    data = _request(client, "POST", f"/api/sessions/{session_id}/message", json={"text": args.instruction})
    _print_session(data["session"], show_sketch=True)
    return 0


def _cmd_compile(args: argparse.Namespace, client: httpx.Client) -> int:
    data = _request(client, "POST", f"/api/sessions/{args.session}/compile")
    _print_session(data["session"])
    return 0


def _cmd_upload(args: argparse.Namespace, client: httpx.Client) -> int:
    data = _request(client, "POST", f"/api/sessions/{args.session}/upload", json={"port": args.port})
    _print_session(data["session"])
    return 0


def _cmd_knobs(args: argparse.Namespace, client: httpx.Client) -> int:
    if args.action == "list":
        data = _request(client, "GET", f"/api/sessions/{args.session}/knobs")
        knobs = data["knobs"]["knobs"]
        if not knobs:
            print("no knobs found in the current sketch")
            return 0
        for knob in knobs:
            print(
                f"{knob['id']}: {knob['text']} "
                f"[{knob['suggested_min']} .. {knob['suggested_max']}, step {knob['suggested_step']}]"
            )
        return 0
    if not args.knob or args.value is None:
        raise CliError("knobs set requires --knob ID --value NUMBER")
    data = _request(
        client,
        "PATCH",
        f"/api/sessions/{args.session}/knobs/{args.knob}",
        json={"value": args.value},
    )
    print(f"{args.knob} set to {args.value}; recompile and upload to apply")
    _print_session(data["session"])
    return 0


def _cmd_replay(args: argparse.Namespace, client: httpx.Client) -> int:
    data = _request(client, "GET", f"/api/sessions/{args.session}/replay")
    _print_session(data["session"])
    print(f"replay matches live state: {'yes' if data['matches_live'] else 'NO'}")
    return 0 if data["matches_live"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sketchpilot", description="Hardware-aware sketch generation service")
    parser.add_argument("--base-url", default=DEFAULT_BASE_URL, help="service URL for client commands")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--config", help="JSON config file path")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--ui-dir", help="static frontend directory to mount at /")
    serve.set_defaults(func=_cmd_serve, needs_client=False)

    chat = sub.add_parser("chat", help="create a session (or continue one) and send an instruction")
    chat.add_argument("--manifest", help="JSON file with the hardware manifest")
    chat.add_argument("--session", help="existing session id to continue")
    chat.add_argument("--instruction", required=True)
    chat.set_defaults(func=_cmd_chat, needs_client=True)

    compile_cmd = sub.add_parser("compile", help="compile the session's current sketch")
    compile_cmd.add_argument("--session", required=True)
    compile_cmd.set_defaults(func=_cmd_compile, needs_client=True)

    upload = sub.add_parser("upload", help="upload the session's current sketch")
    upload.add_argument("--session", required=True)
    upload.add_argument("--port", required=True)
    upload.set_defaults(func=_cmd_upload, needs_client=True)

    knobs = sub.add_parser("knobs", help="list or set tunable constants")
    knobs.add_argument("action", choices=["list", "set"])
    knobs.add_argument("--session", required=True)
    knobs.add_argument("--knob", help="knob id (for set)")
    knobs.add_argument("--value", type=float, help="new value (for set)")
    knobs.set_defaults(func=_cmd_knobs, needs_client=True)

    replay = sub.add_parser("replay", help="rebuild a session from its event log and compare")
    replay.add_argument("--session", required=True)
    replay.set_defaults(func=_cmd_replay, needs_client=True)

    return parser


def main(argv: list[str] | None = None, client: httpx.Client | None = None) -> int:
    args = build_parser().parse_args(argv)
    owns_client = False
    try:
        if args.needs_client and client is None:
            client = httpx.Client(base_url=args.base_url, timeout=300.0)
            owns_client = True
        return args.func(args, client)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        if owns_client and client is not None:
            client.close()


if __name__ == "__main__":
    sys.exit(main())
