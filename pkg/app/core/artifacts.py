"""Delimited-text artifact writer.

Every table starts with one ``#`` metadata line naming the command, the
sha256 of its validated config and the seed, followed by a CSV body written
at full double precision.
"""
from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any

import pandas as pd
from pydantic import BaseModel

from app.core.config import settings
from app.core.validation import safe_path_under

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def config_hash(config: BaseModel | dict[str, Any]) -> str:
    """sha256 over the canonical JSON form of a config."""
    doc = config.model_dump(mode="json") if isinstance(config, BaseModel) else config
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode("utf-8")).hexdigest()


def header_line(command: str, digest: str, seed: int) -> str:
    return f"# qpie {command} config_sha256={digest} seed={seed}\n"


def output_dir(out: Path | str | None) -> Path:
    """Resolve and create the artifact directory (``QPIE_OUTPUT_DIR`` by default)."""
    path = Path(out).resolve() if out else settings.OUTPUT_DIR
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_table(
    df: pd.DataFrame,
    out_dir: Path,
    name: str,
    *,
    command: str,
    config: BaseModel,
    seed: int,
) -> Path:
    """Write ``df`` as ``out_dir/name`` with the metadata header. Returns the path."""
    path = safe_path_under(out_dir, name)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(header_line(command, config_hash(config), seed))
        fh.write(body)
    logger.info("Wrote %s (%d rows)", path, len(df))
    return path


def write_document(doc: dict[str, Any], out_dir: Path, name: str) -> Path:
    """Write a JSON document with sorted keys (byte-stable for equal input)."""
    path = safe_path_under(out_dir, name)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def read_header(path: Path | str) -> dict[str, str]:
    """Parse the ``#`` metadata line of a table into a dict."""
    with Path(path).open(encoding="utf-8") as fh:
        first = fh.readline().strip()
    if not first.startswith("# qpie "):
        return {}
    parts = first[len("# qpie ") :].split()
    meta = {"command": parts[0]} if parts else {}
    for part in parts[1:]:
        key, _, value = part.partition("=")
        meta[key] = value
    return meta


def read_table(path: Path | str) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")
