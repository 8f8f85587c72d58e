"""Service configuration shared by `serve` and the HTTP layer."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import FixtureParseError
from .gateway import LiveBackend, TextBackend, load_rule_tables, load_script, rule_mock


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"  # mock | scripted | live
    table_path: str | None = None
    script_path: str | None = None
    endpoint: str = ""
    model: str = ""
    api_key: str = ""
    temperature: float = 0.0


@dataclass(frozen=True)
class ServiceConfig:
    store_root: str
    tokens: dict[str, dict[str, str]] = field(default_factory=dict)
    backend: BackendConfig = field(default_factory=BackendConfig)
    host: str = "127.0.0.1"
    port: int = 8040

    @staticmethod
    def from_dict(raw: dict[str, Any]) -> "ServiceConfig":
        backend_raw = raw.get("backend", {})
        return ServiceConfig(
            store_root=raw["store_root"],
            tokens=raw.get("tokens", {}),
            backend=BackendConfig(
                kind=backend_raw.get("kind", "mock"),
                table_path=backend_raw.get("table_path"),
                script_path=backend_raw.get("script_path"),
                endpoint=backend_raw.get("endpoint", ""),
                model=backend_raw.get("model", ""),
                api_key=backend_raw.get("api_key", ""),
                temperature=backend_raw.get("temperature", 0.0),
            ),
            host=raw.get("host", "127.0.0.1"),
            port=raw.get("port", 8040),
        )


def load_config(path: str | Path) -> ServiceConfig:
    try:
        raw = json.loads(Path(path).read_text("utf-8"))
    except OSError as exc:
        raise FixtureParseError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FixtureParseError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "store_root" not in raw:
        raise FixtureParseError(f"config {path} must be an object with store_root")
    return ServiceConfig.from_dict(raw)


def build_backend(config: BackendConfig) -> TextBackend:
    if config.kind == "mock":
        tables = load_rule_tables(config.table_path) if config.table_path else None
        return rule_mock(tables)
    if config.kind == "scripted":
        if not config.script_path:
            raise FixtureParseError("scripted backend needs script_path")
        return load_script(config.script_path)
    if config.kind == "live":
        if not config.endpoint or not config.model:
            raise FixtureParseError("live backend needs endpoint and model")
        return LiveBackend(
            config.endpoint,
            config.model,
            config.api_key,
            temperature=config.temperature,
        )
    raise FixtureParseError(f"unknown backend kind {config.kind!r}")
