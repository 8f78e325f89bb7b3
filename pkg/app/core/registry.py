"""Module auto-discovery for the QPIE circuit engine.

Walks ``app.modules`` at startup and calls each subpackage's
``register(subparsers)`` hook. Modules can optionally expose ``MODULE_META``
(dict with id/name/description/commands) which is collected and returned so
``main`` can list what is installed without knowing about individual modules.
Library-only modules (kernel, gates, ...) have no hook and are skipped.
"""
from __future__ import annotations

import argparse
import importlib
import logging
import pkgutil
from pathlib import Path
from typing import Any

logger = logging.getLogger(__name__)


def load_modules(subparsers: argparse._SubParsersAction) -> list[dict[str, Any]]:
    """Discover every subpackage under ``app.modules`` and register its commands.

    Returns a list of MODULE_META dicts for modules that provide one.
    """
    modules_pkg = importlib.import_module("app.modules")
    registered: list[dict[str, Any]] = []

    for info in sorted(pkgutil.iter_modules(modules_pkg.__path__), key=lambda i: i.name):
        if not info.ispkg:
            continue
        mod_name = f"app.modules.{info.name}"
        try:
            module = importlib.import_module(mod_name)
        except Exception as exc:
            logger.exception("Failed to import module %s: %s", mod_name, exc)
            continue

        register = getattr(module, "register", None)
        if register is None:
            logger.debug("Module %s exposes no commands", mod_name)
            continue

        try:
            register(subparsers)
        except Exception as exc:
            logger.exception("Module %s failed to register: %s", mod_name, exc)
            continue

        meta = getattr(module, "MODULE_META", None)
        if meta:
            registered.append(meta)
            logger.debug("Registered module: %s", meta.get("id", info.name))
        else:
            logger.debug("Registered module: %s (no meta)", info.name)

    return registered


def common_parser() -> argparse.ArgumentParser:
    """Flags shared by every experiment command (use as an argparse parent)."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", type=Path, default=None, help="JSON config document (defaults if omitted)")
    parser.add_argument("--seed", type=int, default=None, help="Override the config seed")
    parser.add_argument(
        "--backend",
        choices=("analytic", "sampled", "noisy"),
        default=None,
        help="Override the execution backend",
    )
    parser.add_argument("--out", type=Path, default=None, help="Artifact directory (default QPIE_OUTPUT_DIR)")
    return parser
