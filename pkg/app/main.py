"""Command-line entry point for the QPIE circuit engine.

Commands are auto-discovered from ``app.modules``: every subpackage that
exposes ``register(subparsers)`` adds its own subcommands, so nothing here
names individual experiments.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence

from pydantic import ValidationError

from app.core.config import settings
from app.core.registry import load_modules
from app.core.validation import ConfigError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _configure_logging() -> None:
    logging.basicConfig(
        level=logging.DEBUG if settings.DEBUG else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def build_parser() -> tuple[argparse.ArgumentParser, list[dict]]:
    parser = argparse.ArgumentParser(
        prog="qpie",
        description=f"{settings.PROJECT_NAME} {settings.VERSION}",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="<command>")
    registered = load_modules(subparsers)

    schema = subparsers.add_parser("schema", help="Print the JSON schema of a command config")
    schema.add_argument("name", help="Command whose config schema to print")
    schema.set_defaults(handler=None)
    return parser, registered


def _schemas(registered: list[dict]) -> dict:
    out: dict = {}
    for meta in registered:
        out.update(meta.get("commands", {}))
    return out


def _print_schema(name: str, registered: list[dict]) -> int:
    models = _schemas(registered)
    if name not in models:
        logger.error("No config schema for %r; known: %s", name, ", ".join(sorted(models)))
        return EXIT_USAGE
    sys.stdout.write(json.dumps(models[name].model_json_schema(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    """Run one command; returns the process exit code."""
    _configure_logging()
    parser, registered = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE

    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    if args.command == "schema":
        return _print_schema(args.name, registered)

    logger.info("Running %s (modules: %s)", args.command, [m.get("id") for m in registered])
    # Imported here so discovery failures above never mask a usage error.
    from app.modules.grad import DispatchError

    try:
        code = args.handler(args)
    except (ValidationError, ConfigError, DispatchError) as exc:
        logger.error("%s: %s", args.command, exc)
        return EXIT_USAGE
    except ValueError as exc:
        logger.error("%s failed: %s", args.command, exc)
        return EXIT_FAILURE
    except Exception:
        logger.exception("%s failed unexpectedly", args.command)
        return EXIT_FAILURE
    logger.info("%s finished with exit code %d", args.command, code)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
