"""``qpie fim``: Fisher heatmap and spectra for a classical and a hybrid model."""
from __future__ import annotations

import argparse
import logging

from app.core.artifacts import output_dir, write_table
from app.core.registry import common_parser
from app.core.validation import load_command_config
from app.modules.analysis.schemas import FimConfig
from app.modules.analysis.services import FimError, empirical_fim, heatmap_table, spectrum_compare
from app.modules.data import Dataset, make_dataset
from app.modules.engine.schemas import cli_overrides
from app.modules.hybrid import (
    HybridModel,
    TrainConfig,
    build_classical_model,
    build_hybrid_model,
    load_checkpoint,
    train,
)

logger = logging.getLogger(__name__)


def _hybrid_model(config: FimConfig, dataset: Dataset) -> HybridModel:
    if config.checkpoint is None:
        return build_hybrid_model(config.model, dataset.n_dims, dataset.n_classes, seed=config.seed)
    model, _ = load_checkpoint(config.checkpoint)
    if (model.n_inputs, model.n_outputs) != (dataset.n_dims, dataset.n_classes):
        raise FimError(
            f"checkpoint maps {model.n_inputs} inputs to {model.n_outputs} outputs; "
            f"dataset {config.dataset.name} has {dataset.n_dims} dims and {dataset.n_classes} classes"
        )
    return model


def cmd_fim(args: argparse.Namespace) -> int:
    overrides = {**cli_overrides(args), "checkpoint": getattr(args, "checkpoint", None)}
    config = load_command_config(FimConfig, args.config, overrides=overrides)
    out = output_dir(args.out)
    dataset = make_dataset(config.dataset)

    classical = build_classical_model(dataset.n_dims, dataset.n_classes, config.model, seed=config.seed)
    hybrid = _hybrid_model(config, dataset)
    if config.train_epochs:
        schedule = TrainConfig(
            epochs=config.train_epochs, lr=config.lr, backend=config.backend, seed=config.seed, log_every=0
        )
        train(classical, dataset, schedule)
        if config.checkpoint is None:
            train(hybrid, dataset, schedule)

    common = {"max_params": config.max_params, "max_samples": config.max_samples, "bins": config.bins}
    classical_fim = empirical_fim(classical, dataset, config.backend, scope="all", label="classical", **common)
    hybrid_fim = empirical_fim(hybrid, dataset, config.backend, scope=config.scope, label="hybrid", **common)
    report = spectrum_compare(classical_fim, hybrid_fim)

    meta = {"config": config, "seed": config.seed}
    write_table(heatmap_table(hybrid_fim), out, "fim_heatmap.csv", command="fim", **meta)
    write_table(report.densities(), out, "fim_spectrum.csv", command="fim", **meta)
    write_table(report.summary(), out, "fim_compare.csv", command="fim", **meta)
    logger.info(
        "Fisher max eigenvalue: classical %.4g, hybrid %.4g",
        classical_fim.max_eigenvalue,
        hybrid_fim.max_eigenvalue,
    )
    return 0


def register_commands(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "fim", parents=[common_parser()], help="Empirical Fisher heatmap and eigenvalue spectra"
    )
    parser.add_argument("--checkpoint", help="Hybrid model checkpoint (overrides the config file)")
    parser.set_defaults(handler=cmd_fim)
