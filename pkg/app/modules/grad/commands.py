"""``qpie gradcheck`` and ``qpie aao-grow``."""
from __future__ import annotations

import argparse
import logging
import math

import numpy as np
import pandas as pd

from app.core.artifacts import output_dir, write_table
from app.core.registry import common_parser
from app.core.validation import load_command_config
from app.modules.circuit import ParamCircuit, build_random_circuit, gate
from app.modules.engine import AnalyticSV, ZString, run
from app.modules.engine.schemas import cli_overrides
from app.modules.gates import GateKind
from app.modules.grad.schemas import AaoGrowConfig, GradcheckConfig
from app.modules.grad.services import (
    CandidatePool,
    DispatchError,
    GradMethod,
    aao_scores,
    extend,
    gradient,
    max_deviation,
)

logger = logging.getLogger(__name__)

GRADCHECK_COLUMNS = ["circuit", "n_qubits", "param", "param_shift", "adjoint", "finite_diff", "max_deviation"]


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------


def _methods(config: GradcheckConfig) -> dict[str, GradMethod]:
    table = {
        "param_shift": GradMethod.param_shift(),
        "adjoint": GradMethod.adjoint(),
        "finite_diff": GradMethod.finite_diff(config.fd_step),
    }
    if "adjoint" in config.methods and not isinstance(config.backend, AnalyticSV):
        raise DispatchError(f"adjoint differentiation needs the analytic backend, got {config.backend.kind!r}")
    return {name: table[name] for name in config.methods}


def gradcheck_table(config: GradcheckConfig) -> pd.DataFrame:
    """One row per (circuit, trainable index) with every requested method's value."""
    methods = _methods(config)
    rng = np.random.default_rng(config.seed)
    low = max(config.min_qubits, 2 if config.conditional else 1)
    frames = []
    for index in range(config.n_circuits):
        n_qubits = int(rng.integers(low, config.max_qubits + 1))
        n_params = int(rng.integers(1, config.max_params + 1))
        circuit = build_random_circuit(
            n_qubits, n_params, seed=config.seed * 100_003 + index, conditional=config.conditional
        )
        theta = rng.uniform(-math.pi, math.pi, n_params)
        observables = [ZString((0,))]
        if n_qubits > 1:
            observables.append(ZString((0, n_qubits - 1), 0.5))

        frame = pd.DataFrame(
            {"circuit": index, "n_qubits": n_qubits, "param": np.arange(n_params)},
            columns=GRADCHECK_COLUMNS,
        )
        columns = []
        for name, method in methods.items():
            grad = gradient(circuit, theta, None, config.backend, observables, method=method)
            frame[name] = grad.values
            columns.append(grad.values)
        frame["max_deviation"] = max_deviation(columns)
        frames.append(frame)
        logger.debug("circuit %d: %d qubits, %d params", index, n_qubits, n_params)
    return pd.concat(frames, ignore_index=True)


def cmd_gradcheck(args: argparse.Namespace) -> int:
    config = load_command_config(GradcheckConfig, args.config, overrides=cli_overrides(args))
    out = output_dir(args.out)
    table = gradcheck_table(config)
    write_table(table, out, "gradcheck.csv", command="gradcheck", config=config, seed=config.seed)

    worst = float(table["max_deviation"].max())
    breaches = int((table["max_deviation"] > config.tolerance).sum())
    logger.info(
        "gradcheck: %d circuits, %d parameters, max deviation %.3e (tolerance %.1e)",
        config.n_circuits,
        len(table),
        worst,
        config.tolerance,
    )
    if breaches:
        logger.error("gradcheck: %d parameters exceed tolerance %.1e", breaches, config.tolerance)
        return 1
    return 0


# ---------------------------------------------------------------------------
# aao-grow
# ---------------------------------------------------------------------------


def aao_growth_table(config: AaoGrowConfig) -> pd.DataFrame:
    """Grow a circuit one candidate at a time, descending on the cost after each step."""
    nodes = tuple(gate(GateKind.H, q) for q in range(config.n_qubits)) if config.initial_hadamards else ()
    circuit = ParamCircuit(config.n_qubits, 0, nodes, n_trainable=0, n_features=0)
    theta = np.zeros(0)
    observable = ZString(tuple(config.observable_qubits))
    pool = CandidatePool.default(range(config.n_qubits))

    rows = []
    for step in range(config.steps):
        scores = aao_scores(circuit, theta, None, config.backend, observable, pool)
        best = int(np.argmax(scores))
        chosen = pool.candidates[best]
        circuit, theta = extend(circuit, theta, chosen)
        logger.info("AAO step %d: appended %s (|grad|=%.6g)", step, chosen.label(), scores[best])
        for _ in range(config.inner_steps):
            grad = gradient(circuit, theta, None, config.backend, observable)
            theta = theta - config.lr * grad.values
        cost = float(np.sum(run(circuit, theta, None, config.backend, observable).expectations))
        rows.append(
            {
                "step": step,
                "candidate": chosen.label(),
                "score": float(scores[best]),
                "n_trainable": circuit.n_trainable,
                "cost": cost,
            }
        )
    return pd.DataFrame(rows, columns=["step", "candidate", "score", "n_trainable", "cost"])


def cmd_aao_grow(args: argparse.Namespace) -> int:
    config = load_command_config(AaoGrowConfig, args.config, overrides=cli_overrides(args))
    out = output_dir(args.out)
    table = aao_growth_table(config)
    write_table(table, out, "aao_growth.csv", command="aao-grow", config=config, seed=config.seed)
    return 0


def register_commands(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "gradcheck",
        parents=[common_parser()],
        help="Compare parameter-shift, adjoint and finite-difference gradients on random circuits",
    )
    parser.set_defaults(handler=cmd_gradcheck)

    parser = subparsers.add_parser(
        "aao-grow",
        parents=[common_parser()],
        help="Grow a circuit with the angle-adaptive optimizer",
    )
    parser.set_defaults(handler=cmd_aao_grow)
