"""Server configuration: defaults, SCRIPTMEET_* environment variables, flags."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

ENV_PREFIX = "SCRIPTMEET_"

DEFAULT_LISTEN = "127.0.0.1:8700"


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ServerConfig:
    listen_address: str = DEFAULT_LISTEN
    ttl_seconds: float = 180.0
    silence_threshold: float = 0.7
    tick_interval: float = 1.0
    backlog_window: int = 1000
    data_dir: str = "./data"

    def __post_init__(self) -> None:
        for name in ("ttl_seconds", "silence_threshold", "tick_interval"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.backlog_window < 1:
            raise ConfigError("backlog_window must be >= 1")

    @property
    def host(self) -> str:
        host, _, _ = self.listen_address.rpartition(":")
        return host or "127.0.0.1"

    @property
    def port(self) -> int:
        _, _, port = self.listen_address.rpartition(":")
        try:
            return int(port)
        except ValueError:
            raise ConfigError(f"bad listen_address {self.listen_address!r}") from None


_FIELD_TYPES: dict[str, Any] = {
    "listen_address": str,
    "ttl_seconds": float,
    "silence_threshold": float,
    "tick_interval": float,
    "backlog_window": int,
    "data_dir": str,
}


def load_config(
    overrides: Mapping[str, Any] | None = None, env: Mapping[str, str] | None = None
) -> ServerConfig:
    """Defaults, then SCRIPTMEET_* env vars, then explicit overrides."""
    env = os.environ if env is None else env
    values: dict[str, Any] = {}
    for name, cast in _FIELD_TYPES.items():
        raw = env.get(ENV_PREFIX + name.upper())
        if raw is not None:
            try:
                values[name] = cast(raw)
            except ValueError:
                raise ConfigError(f"bad value for {ENV_PREFIX + name.upper()}: {raw!r}") from None
    if overrides:
        for name, value in overrides.items():
            if value is None:
                continue
            if name not in _FIELD_TYPES:
                raise ConfigError(f"unknown config field {name!r}")
            values[name] = _FIELD_TYPES[name](value)
    return ServerConfig(**values)


def ensure_writable_data_dir(config: ServerConfig) -> Path:
    """data_dir must be writable at startup; probes with a real file."""
    path = Path(config.data_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write-probe"
        probe.write_text("ok", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"data_dir {path} is not writable: {exc}") from exc
    return path
