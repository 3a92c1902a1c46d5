"""Config loader: reads a flat YAML or JSON file into ``Config``."""

from __future__ import annotations

from pathlib import Path
from typing import Any

import yaml

from fpmm.schemas.config import Config
from fpmm.schemas.landmarks import KeypointSpec, default_keypoint_spec

CONFIG_SIDECAR_SUFFIX = ".config.json"


def load_config(path: str | Path | None, overrides: dict[str, Any] | None = None) -> Config:
    """Load and validate a config file, with ``overrides`` applied on top.

    ``path`` may be None to start from the defaults. Override values of None
    are ignored, so unset CLI flags never clobber the file.

    Raises ``FileNotFoundError`` if the path doesn't exist and
    ``pydantic.ValidationError`` if the content is invalid.
    """
    raw: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Config file not found: {path}")
        loaded = yaml.safe_load(path.read_text())
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ValueError(f"Config file must be a mapping, got {type(loaded).__name__}")
        raw = loaded

    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    return Config(**raw)


def sidecar_path(checkpoint: str | Path) -> Path:
    """``<checkpoint>.config.json``, written next to every trained checkpoint."""
    checkpoint = Path(checkpoint)
    return checkpoint.with_name(checkpoint.name + CONFIG_SIDECAR_SUFFIX)


def save_sidecar(config: Config, checkpoint: str | Path) -> Path:
    path = sidecar_path(checkpoint)
    path.write_text(config.model_dump_json(indent=2))
    return path


def keypoint_spec_for(config: Config) -> KeypointSpec:
    """The spec named by ``config.keypoint_spec_file``, or the built-in default."""
    if config.keypoint_spec_file:
        return KeypointSpec.load(config.keypoint_spec_file)
    return default_keypoint_spec()
