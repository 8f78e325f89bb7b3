"""``qpie noise-sweep``: <Z> after each noise channel on |0>."""
from __future__ import annotations

import argparse
import logging

import pandas as pd

from app.core.artifacts import output_dir, write_table
from app.core.registry import common_parser
from app.core.validation import load_command_config
from app.modules.engine.schemas import NoiseSweepConfig, cli_overrides
from app.modules.engine.services import closed_form_z, noise_sweep

logger = logging.getLogger(__name__)


def cmd_noise_sweep(args: argparse.Namespace) -> int:
    config = load_command_config(NoiseSweepConfig, args.config, overrides=cli_overrides(args))
    out = output_dir(args.out)

    rows = []
    for channel in config.channels:
        values = noise_sweep(channel, config.probabilities)
        for p, value in zip(config.probabilities, values, strict=True):
            rows.append(
                {"channel": channel, "p": p, "expectation": value, "closed_form": closed_form_z(channel, p)}
            )
    table = pd.DataFrame(rows, columns=["channel", "p", "expectation", "closed_form"])
    write_table(table, out, "noise_sweep.csv", command="noise-sweep", config=config, seed=config.seed)
    logger.info("Noise sweep: %d channels x %d probabilities", len(config.channels), len(config.probabilities))
    return 0


def register_commands(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "noise-sweep",
        parents=[common_parser()],
        help="Expectation of Z after each noise channel on |0>",
    )
    parser.set_defaults(handler=cmd_noise_sweep)
