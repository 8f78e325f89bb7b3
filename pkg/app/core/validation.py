"""Shared input-validation helpers.

Used by every command so config loading and output placement don't drift
across modules.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, TypeVar

from pydantic import BaseModel

from app.core.config import settings

logger = logging.getLogger(__name__)

ConfigT = TypeVar("ConfigT", bound=BaseModel)


class ConfigError(ValueError):
    """Raised when a config file or output location cannot be used."""


def read_config_file(path: Path | str, allowed_extensions: set[str] | None = None) -> str:
    """Read + validate a config file. Returns its text on success.

    Checks:
      1. Filename has an allowed extension.
      2. Byte length is non-zero and within MAX_CONFIG_BYTES.
      3. Content decodes as UTF-8.

    Raises ConfigError on any failure.
    """
    allowed = allowed_extensions if allowed_extensions is not None else settings.ALLOWED_CONFIG_EXTENSIONS

    path = Path(path)
    ext = path.suffix.lower()
    if ext not in allowed:
        raise ConfigError(f"Unsupported config type. Allowed: {', '.join(sorted(allowed))}")

    try:
        content = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"Unable to read config {path}: {exc}") from exc
    if len(content) == 0:
        raise ConfigError("Config file is empty")
    if len(content) > settings.MAX_CONFIG_BYTES:
        raise ConfigError(f"Config exceeds {settings.MAX_CONFIG_KB} KB limit")

    try:
        return content.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError("Config file is not valid UTF-8") from exc


def safe_path_under(base: Path, candidate: Path | str) -> Path:
    """Return ``candidate`` resolved, but only if it lives under ``base``.

    Artifact names come from config documents; this keeps every write inside
    the chosen output directory. Raises ConfigError if the resolved path
    escapes it.
    """
    base_resolved = base.resolve()
    resolved = (base_resolved / candidate).resolve()
    try:
        resolved.relative_to(base_resolved)
    except ValueError:
        raise ConfigError(f"Output path escapes {base_resolved}: {candidate}") from None
    return resolved


def load_command_config(
    model: type[ConfigT],
    path: Path | str | None,
    *,
    overrides: dict[str, Any] | None = None,
) -> ConfigT:
    """Validate a command config document, applying CLI overrides on top.

    A missing path means the model defaults. Overrides whose key the model
    does not declare are ignored with a warning. Raises ConfigError for
    unreadable or non-JSON files and pydantic ``ValidationError`` for schema
    violations; either happens before any computation.
    """
    doc: dict[str, Any] = {}
    if path is not None:
        text = read_config_file(path)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"Config {path} must be a JSON object")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in model.model_fields:
            logger.warning("Ignoring --%s: %s has no such setting", key, model.__name__)
            continue
        doc[key] = value
    return model.model_validate(doc)
