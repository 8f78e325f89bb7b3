"""``qpie train``, ``qpie narma`` and ``qpie vqe``."""
from __future__ import annotations

import argparse
import logging

import numpy as np
import pandas as pd

from app.core.artifacts import output_dir, write_table
from app.core.registry import common_parser
from app.core.validation import load_command_config
from app.modules.circuit import build_ry_product
from app.modules.data import Dataset, gen_narma, make_dataset, narma_windows, noisy_target
from app.modules.engine.schemas import cli_overrides
from app.modules.hybrid.checkpoint import save_checkpoint
from app.modules.hybrid.model import HybridModel, build_hybrid_model, forward
from app.modules.hybrid.schemas import NarmaCommandConfig, TrainCommandConfig, TrainConfig, VqeConfig
from app.modules.hybrid.training import accuracy, pretrain_transfer, train
from app.modules.hybrid.vqe import hamiltonian_from_config, vqe_minimize

logger = logging.getLogger(__name__)

BOUNDARY_CHUNK = 4096


def decision_boundary(model: HybridModel, dataset: Dataset, grid: int) -> pd.DataFrame:
    """Predicted class and its probability on a ``grid x grid`` lattice around the data."""
    lo = dataset.features.min(axis=0) - 0.5
    hi = dataset.features.max(axis=0) + 0.5
    xs = np.linspace(lo[0], hi[0], grid)
    ys = np.linspace(lo[1], hi[1], grid)
    mesh = np.stack(np.meshgrid(xs, ys, indexing="xy"), axis=-1).reshape(-1, 2)
    probs = np.concatenate(
        [forward(model, mesh[i : i + BOUNDARY_CHUNK]) for i in range(0, len(mesh), BOUNDARY_CHUNK)]
    )
    return pd.DataFrame(
        {
            "x0": mesh[:, 0],
            "x1": mesh[:, 1],
            "label": np.argmax(probs, axis=1),
            "probability": np.max(probs, axis=1),
        }
    )


def cmd_train(args: argparse.Namespace) -> int:
    config = load_command_config(TrainCommandConfig, args.config, overrides=cli_overrides(args))
    out = output_dir(args.out)
    dataset = make_dataset(config.dataset)
    logger.info(
        "Training on %s: %d rows, %d quantum nodes, backend=%s",
        config.dataset.name,
        dataset.n_samples,
        config.model.n_nodes,
        config.backend.kind,
    )

    model = build_hybrid_model(config.model, dataset.n_dims, dataset.n_classes, seed=config.seed)
    if config.pretrain is not None and model.frontend is not None:
        source = make_dataset(config.pretrain.source)
        pretrain_transfer(
            model.frontend,
            source,
            config.pretrain.freeze_first,
            TrainConfig(epochs=config.pretrain.epochs, lr=config.pretrain.lr, seed=config.seed, log_every=0),
        )

    model, trace = train(model, dataset, config.train_config())
    scores = {config.backend.kind: accuracy(model, dataset)}
    for backend in config.evaluate_on:
        if backend.kind not in scores:
            scores[backend.kind] = accuracy(model, dataset, backend)
    model.set_backend(config.backend)
    for kind, score in scores.items():
        logger.info("accuracy on %s backend: %.4f", kind, score)

    save_checkpoint(model, out, config=config, seed=config.seed, extra={"accuracy": scores})
    write_table(pd.DataFrame(trace.as_columns()), out, "trace.csv", command="train", config=config, seed=config.seed)
    if dataset.n_dims == 2:
        boundary = decision_boundary(model, dataset, config.boundary_grid)
        write_table(boundary, out, "boundary.csv", command="train", config=config, seed=config.seed)
    return 0


def cmd_narma(args: argparse.Namespace) -> int:
    config = load_command_config(NarmaCommandConfig, args.config, overrides=cli_overrides(args))
    out = output_dir(args.out)
    series = gen_narma(config.order, config.length, config.seed, alpha=config.alpha)
    inputs, targets = narma_windows(series, config.lags)
    dataset = Dataset(inputs, targets, 0, {"name": f"narma{config.order}", "seed": config.seed})

    noise = [noisy_target(targets, epoch, config.seed, alpha=series.alpha) for epoch in range(config.epochs)]
    model = build_hybrid_model(config.model, dataset.n_dims, 1, task="regression", seed=config.seed)
    model, trace = train(model, dataset, config.train_config(), target_schedule=lambda epoch: noise[epoch].values)

    prediction = forward(model, inputs)
    last = noise[-1] if noise else None
    predictions = pd.DataFrame(
        {
            "t": np.arange(len(targets)) + (len(series) - len(targets)),
            "target": targets,
            "prediction": prediction,
            "noisy_target": last.values if last is not None else targets,
            "sigma": last.sigma if last is not None else 0.0,
        }
    )
    write_table(predictions, out, "narma_prediction.csv", command="narma", config=config, seed=config.seed)
    epochs = pd.DataFrame(
        {
            "epoch": np.arange(len(trace)),
            "mse": trace.loss,
            "eta": [n.eta for n in noise[: len(trace)]],
            "sigma": [n.sigma for n in noise[: len(trace)]],
        }
    )
    write_table(epochs, out, "narma_epochs.csv", command="narma", config=config, seed=config.seed)
    logger.info("NARMA%d: final clean mse %.6g", config.order, float(np.mean((prediction - targets) ** 2)))
    return 0


def cmd_vqe(args: argparse.Namespace) -> int:
    config = load_command_config(VqeConfig, args.config, overrides=cli_overrides(args))
    out = output_dir(args.out)
    result = vqe_minimize(build_ry_product(config.n_qubits), hamiltonian_from_config(config), config)
    table = pd.DataFrame(
        {
            "iteration": np.arange(len(result.energies)),
            "energy": result.energies,
            "ground_energy": result.ground_energy,
        }
    )
    write_table(table, out, "vqe_energy.csv", command="vqe", config=config, seed=config.seed)
    logger.info("VQE: E=%.10g (ground %.10g, converged=%s)", result.energy, result.ground_energy, result.converged)
    return 0


def register_commands(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("train", parents=[common_parser()], help="Train a hybrid classifier")
    parser.set_defaults(handler=cmd_train)

    parser = subparsers.add_parser(
        "narma", parents=[common_parser()], help="Fit a NARMA series with decaying target noise"
    )
    parser.set_defaults(handler=cmd_narma)

    parser = subparsers.add_parser("vqe", parents=[common_parser()], help="Minimise a Z-string Hamiltonian")
    parser.set_defaults(handler=cmd_vqe)
