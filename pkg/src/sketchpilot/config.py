"""Service configuration: one JSON file wiring provider, toolchain, and loop policy.

The model credential is never stored here; the file names the environment
variable that holds it and nothing else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .llm import ProviderConfig
from .loop import LoopPolicy
from .toolchain import ToolchainConfig


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class AppConfig:
    provider: ProviderConfig
    toolchain: ToolchainConfig = field(default_factory=ToolchainConfig)
    data_dir: str = "data"
    loop: LoopPolicy = field(default_factory=LoopPolicy)


def default_config(data_dir: str = "data") -> AppConfig:
    """Offline-friendly default: replay fixtures plus the mock toolchain."""
    return AppConfig(
        provider=ProviderConfig(kind="replay", fixture_path=str(Path(data_dir) / "fixtures.jsonl")),
        toolchain=ToolchainConfig(kind="mock", work_root=str(Path(data_dir) / "work")),
        data_dir=data_dir,
    )


def _provider_from(data: dict) -> ProviderConfig:
    known = {"kind", "endpoint", "credential_env", "model_name", "fixture_path", "timeout", "params"}
    _reject_unknown(data, known, "provider")
    return ProviderConfig(**data)


def _toolchain_from(data: dict) -> ToolchainConfig:
    known = {
        "kind",
        "compile_command",
        "upload_command",
        "list_ports_command",
        "board_id",
        "work_root",
        "timeout",
    }
    _reject_unknown(data, known, "toolchain")
    for key in ("compile_command", "upload_command", "list_ports_command"):
        if key in data:
            data[key] = tuple(data[key])
    return ToolchainConfig(**data)


def _loop_from(data: dict) -> LoopPolicy:
    _reject_unknown(data, {"max_auto_iterations", "auto_repair"}, "loop")
    return LoopPolicy(**data)


def _reject_unknown(data: dict, known: set, section: str) -> None:
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {section} config keys: {', '.join(sorted(unknown))}")


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(data, {"provider", "toolchain", "data_dir", "loop"}, "top-level")
    if "provider" not in data:
        raise ConfigError("config requires a provider section")
    try:
        return AppConfig(
            provider=_provider_from(dict(data["provider"])),
            toolchain=_toolchain_from(dict(data.get("toolchain", {}))),
            data_dir=data.get("data_dir", "data"),
            loop=_loop_from(dict(data.get("loop", {}))),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
