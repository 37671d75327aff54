"""Flat key-value configuration with CLI > env > file > default precedence."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Mapping, Optional

ENV_PREFIX = "TRACKTOK_"

DEFAULTS: dict[str, Any] = {
    "workspace_root": "./workspace",
    "predictor": "uniform",  # uniform | ngram
    "model_path": "",
    "density_table": "",
    "expressive": False,
    "with_controls": False,
    "temperature": 1.0,
    "max_tokens": 2048,
    "seed": 0,
    "host": "127.0.0.1",
    "port": 8765,
}


class ConfigError(ValueError):
    pass


def _coerce(key: str, value: Any) -> Any:
    default = DEFAULTS[key]
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        return str(value).strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return str(value)


def load_config(
    path: Optional[str] = None,
    cli_overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> dict[str, Any]:
    """Resolve the effective configuration.

    ``path`` points at a flat JSON object; unknown keys are rejected so
    typos fail loudly.
    """
    config = dict(DEFAULTS)
    if path:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config file {path} must hold a flat JSON object")
        for key, value in doc.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r} in {path}")
            config[key] = _coerce(key, value)
    env = os.environ if environ is None else environ
    for key in DEFAULTS:
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            config[key] = _coerce(key, env[env_key])
    for key, value in (cli_overrides or {}).items():
        if value is None:
            continue
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        config[key] = _coerce(key, value)
    return config
