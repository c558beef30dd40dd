"""Service configuration: file-based with environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .pipeline import OfflineTranslator, RemoteBackend, TranslatorBackend

ENV_LISTEN = "PLANLENS_LISTEN"
ENV_BACKEND_URL = "PLANLENS_BACKEND_URL"
ENV_AUTH_TOKEN_ENV = "PLANLENS_AUTH_TOKEN_ENV"


class ConfigError(Exception):
    pass


@dataclass
class RemoteConfig:
    base_url: str = ""
    model: str = ""
    auth_token_env: str = ""  # name of the env var holding the bearer token
    timeout_s: float = 30.0


@dataclass
class ServiceConfig:
    listen: str = "127.0.0.1:8040"
    backend: str = "offline"  # "offline" | "remote"
    remote: RemoteConfig = field(default_factory=RemoteConfig)
    example_count: int = 5
    paraphrase: bool = False
    drift_large_swing_fraction: float = 0.5
    lead_time_ratio_threshold: float = 0.25
    lead_time_day_threshold: float = 1.0
    data_dir: str = "data"
    example_bank: str = ""
    service_token_env: str = ""  # optional static bearer protecting the service

    @property
    def host(self) -> str:
        return self.listen.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen.rsplit(":", 1)[1])


def load_config(path: str | Path | None = None) -> ServiceConfig:
    cfg = ServiceConfig()
    if path is not None:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        remote_doc = doc.pop("remote", {})
        for key, value in doc.items():
            if not hasattr(cfg, key):
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
        for key, value in remote_doc.items():
            if not hasattr(cfg.remote, key):
                raise ConfigError(f"unknown remote config key {key!r}")
            setattr(cfg.remote, key, value)
    apply_env_overrides(cfg)
    validate_config(cfg)
    return cfg


def apply_env_overrides(cfg: ServiceConfig) -> None:
    if os.environ.get(ENV_LISTEN):
        cfg.listen = os.environ[ENV_LISTEN]
    if os.environ.get(ENV_BACKEND_URL):
        cfg.remote.base_url = os.environ[ENV_BACKEND_URL]
    if os.environ.get(ENV_AUTH_TOKEN_ENV):
        cfg.remote.auth_token_env = os.environ[ENV_AUTH_TOKEN_ENV]


def validate_config(cfg: ServiceConfig) -> None:
    if cfg.backend not in ("offline", "remote"):
        raise ConfigError(f"backend must be 'offline' or 'remote', got {cfg.backend!r}")
    if cfg.backend == "remote":
        if not cfg.remote.base_url or not cfg.remote.model:
            raise ConfigError("remote backend requires remote.base_url and remote.model")
    if cfg.example_count < 1:
        raise ConfigError("example_count must be >= 1")


def make_backend(cfg: ServiceConfig) -> TranslatorBackend:
    if cfg.backend == "offline":
        return OfflineTranslator()
    token = os.environ.get(cfg.remote.auth_token_env, "") if cfg.remote.auth_token_env else None
    return RemoteBackend(base_url=cfg.remote.base_url, model=cfg.remote.model,
                         auth_token=token or None, timeout_s=cfg.remote.timeout_s)


def service_token(cfg: ServiceConfig) -> str | None:
    if not cfg.service_token_env:
        return None
    return os.environ.get(cfg.service_token_env) or None


__all__ = [
    "ConfigError", "RemoteConfig", "ServiceConfig",
    "load_config", "apply_env_overrides", "validate_config",
    "make_backend", "service_token",
    "ENV_LISTEN", "ENV_BACKEND_URL", "ENV_AUTH_TOKEN_ENV",
]
