"""Dense frontend, quantum nodes bridged into torch autograd, and the hybrid model."""
from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from typing import Any, Literal

import numpy as np
import torch
from torch import nn

from app.modules.circuit import ParamCircuit, RotationPool, build_qpie_vqc
from app.modules.engine import AnalyticSV, NoisyDM, SampledSV, ZString, run
from app.modules.grad import gradient
from app.modules.hybrid.schemas import ModelConfig

logger = logging.getLogger(__name__)

DTYPE = torch.float64
PROB_FLOOR = 1e-12
THETA_INIT = math.pi / 4

AnyBackend = AnalyticSV | SampledSV | NoisyDM
Task = Literal["classification", "regression"]


class TrainingError(ValueError):
    """Raised when a model cannot be built, trained or restored."""


# ---------------------------------------------------------------------------
# Classical frontend
# ---------------------------------------------------------------------------


class DenseNet(nn.Module):
    """Five linear layers with SELU, alpha dropout after the second and fifth."""

    def __init__(
        self,
        n_inputs: int,
        n_outputs: int,
        hidden: Sequence[int] = (32, 32, 16, 16),
        dropout: float = 0.2,
    ) -> None:
        super().__init__()
        if len(hidden) != 4:
            raise TrainingError(f"DenseNet takes four hidden widths, got {list(hidden)}")
        widths = [n_inputs, *hidden, n_outputs]
        self.n_inputs = n_inputs
        self.n_outputs = n_outputs
        self.hidden = tuple(int(w) for w in hidden)
        self.dropout = float(dropout)
        self.layers = nn.ModuleList(nn.Linear(a, b, dtype=DTYPE) for a, b in zip(widths, widths[1:], strict=False))
        self.act = nn.SELU()
        self.drop = nn.AlphaDropout(dropout)
        self.freeze_mask = [False] * len(self.layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for i, layer in enumerate(self.layers):
            x = self.act(layer(x))
            if i in (1, 4):
                x = self.drop(x)
        return x

    def freeze(self, first: int) -> None:
        """Stop gradient updates to the first ``first`` layers."""
        if not 0 <= first < len(self.layers):
            raise TrainingError(f"can freeze 0..{len(self.layers) - 1} layers, got {first}")
        self.set_freeze_mask([i < first for i in range(len(self.layers))])

    def set_freeze_mask(self, mask: Sequence[bool]) -> None:
        self.freeze_mask = [bool(m) for m in mask]
        for frozen, layer in zip(self.freeze_mask, self.layers, strict=True):
            for p in layer.parameters():
                p.requires_grad_(not frozen)


# ---------------------------------------------------------------------------
# Quantum node
# ---------------------------------------------------------------------------


class _CircuitFunction(torch.autograd.Function):
    """Engine expectations forward; dispatched quantum gradients backward."""

    @staticmethod
    def forward(ctx: Any, features: torch.Tensor, theta: torch.Tensor, node: QuantumNode) -> torch.Tensor:
        feats = features.detach().cpu().numpy()
        params = theta.detach().cpu().numpy()
        result = run(node.circuit, params, feats, node.backend, node.observables)
        ctx.node = node
        ctx.save_for_backward(features, theta)
        return torch.as_tensor(np.asarray(result.expectations), dtype=DTYPE)

    @staticmethod
    def backward(ctx: Any, grad_output: torch.Tensor) -> tuple[torch.Tensor | None, torch.Tensor | None, None]:
        features, theta = ctx.saved_tensors
        node: QuantumNode = ctx.node
        with_features = bool(ctx.needs_input_grad[0]) and node.circuit.n_features > 0
        grad = gradient(
            node.circuit,
            theta.detach().cpu().numpy(),
            features.detach().cpu().numpy(),
            node.backend,
            node.observables,
            weights=grad_output.detach().cpu().numpy(),
            with_features=with_features,
        )
        d_features = torch.as_tensor(grad.feature_values, dtype=DTYPE) if with_features else None
        d_theta = torch.as_tensor(np.array(grad.values), dtype=DTYPE)
        return d_features, d_theta, None


class QuantumNode(nn.Module):
    """One parameterised circuit with its own theta block."""

    def __init__(
        self,
        circuit: ParamCircuit,
        *,
        observables: Sequence[ZString] | None = None,
        theta: np.ndarray | None = None,
        seed: int = 0,
    ) -> None:
        super().__init__()
        self.circuit = circuit
        self.observables = list(observables) if observables is not None else circuit.default_observables()
        self.backend: AnyBackend = AnalyticSV()
        if theta is None:
            theta = np.random.default_rng(seed).uniform(-THETA_INIT, THETA_INIT, circuit.n_trainable)
        self.theta = nn.Parameter(torch.as_tensor(np.asarray(theta, dtype=np.float64), dtype=DTYPE))

    @property
    def n_features(self) -> int:
        return self.circuit.n_features

    @property
    def n_outputs(self) -> int:
        return len(self.observables)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return _CircuitFunction.apply(features, self.theta, self)

    def replace(self, circuit: ParamCircuit, theta: np.ndarray) -> None:
        """Swap in a grown circuit and its extended theta."""
        self.circuit = circuit
        self.theta = nn.Parameter(torch.as_tensor(np.asarray(theta, dtype=np.float64), dtype=DTYPE))


# ---------------------------------------------------------------------------
# Hybrid model
# ---------------------------------------------------------------------------


class HybridModel(nn.Module):
    """Frontend, parallel quantum nodes and a linear head.

    The frontend output is split contiguously across the nodes and squashed
    into each embedded slot's range with ``lo + (hi - lo) * sigmoid(z)``.
    Without a frontend the input goes to the nodes unchanged. Without nodes
    the frontend output feeds the head directly (the classical baseline).
    """

    def __init__(
        self,
        nodes: Sequence[QuantumNode],
        n_outputs: int,
        *,
        frontend: DenseNet | None = None,
        n_inputs: int | None = None,
        task: Task = "classification",
    ) -> None:
        super().__init__()
        if task not in ("classification", "regression"):
            raise TrainingError(f"unknown task {task!r}")
        if not nodes and frontend is None:
            raise TrainingError("a model needs a frontend or at least one quantum node")
        self.frontend = frontend
        self.nodes = nn.ModuleList(nodes)
        self.task: Task = task
        self.n_outputs = n_outputs
        self.n_features = sum(node.n_features for node in nodes)
        if frontend is not None:
            self.n_inputs = frontend.n_inputs
            if nodes and frontend.n_outputs != self.n_features:
                raise TrainingError(
                    f"frontend emits {frontend.n_outputs} values, nodes embed {self.n_features} features"
                )
        else:
            self.n_inputs = self.n_features if n_inputs is None else n_inputs
        width = sum(node.n_outputs for node in nodes) if nodes else frontend.n_outputs  # type: ignore[union-attr]
        self.head = nn.Linear(width, n_outputs, dtype=DTYPE)
        ranges = [r for node in nodes for r in node.circuit.feature_ranges()]
        self.register_buffer("range_lo", torch.tensor([r[0] for r in ranges], dtype=DTYPE))
        self.register_buffer("range_hi", torch.tensor([r[1] for r in ranges], dtype=DTYPE))

    @property
    def backend(self) -> AnyBackend:
        return self.nodes[0].backend if len(self.nodes) else AnalyticSV()

    def set_backend(self, backend: AnyBackend) -> None:
        for node in self.nodes:
            node.backend = backend

    def node_inputs(self, x: torch.Tensor) -> list[torch.Tensor]:
        """Per-node embedded angles for a batch ``x``."""
        x = torch.as_tensor(x, dtype=DTYPE)
        if x.ndim != 2 or x.shape[1] != self.n_inputs:
            raise TrainingError(f"input has shape {tuple(x.shape)}, model expects (B, {self.n_inputs})")
        if self.frontend is not None:
            z = self.frontend(x)
            x = self.range_lo + (self.range_hi - self.range_lo) * torch.sigmoid(z)
        return list(torch.split(x, [node.n_features for node in self.nodes], dim=1))

    def expectations(self, x: torch.Tensor) -> torch.Tensor:
        """Concatenated node expectations, the head's input."""
        if not len(self.nodes):
            return self.frontend(torch.as_tensor(x, dtype=DTYPE))  # type: ignore[misc]
        parts = [node(feats) for node, feats in zip(self.nodes, self.node_inputs(x), strict=True)]
        return torch.cat(parts, dim=1)

    def head_output(self, expectations: torch.Tensor) -> torch.Tensor:
        out = self.head(expectations)
        if self.task == "classification":
            return torch.softmax(out, dim=1)
        return out.squeeze(1) if self.n_outputs == 1 else out

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Class probabilities (classification) or predictions (regression)."""
        return self.head_output(self.expectations(x))

    def circuits(self) -> list[ParamCircuit]:
        return [node.circuit for node in self.nodes]


def forward(model: HybridModel, x: Any, backend: AnyBackend | None = None) -> np.ndarray:
    """Evaluation-mode forward pass (dropout off, no autograd)."""
    if backend is not None:
        model.set_backend(backend)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            out = model(torch.as_tensor(np.asarray(x, dtype=np.float64), dtype=DTYPE))
    finally:
        model.train(was_training)
    return out.numpy()


# ---------------------------------------------------------------------------
# Builders and loss
# ---------------------------------------------------------------------------


def rotation_pool(config: ModelConfig) -> RotationPool:
    one_hot = np.zeros((3, 3), dtype=int)
    for branch, rotation in enumerate(config.pool_order):
        one_hot[rotation, branch] = 1
    return RotationPool(tuple(tuple(int(v) for v in row) for row in one_hot), config.tau_low, config.tau_high)


def build_hybrid_model(
    config: ModelConfig,
    n_inputs: int,
    n_outputs: int,
    *,
    task: Task = "classification",
    seed: int = 0,
) -> HybridModel:
    """Nodes of ``build_qpie_vqc`` with the configured frontend and head."""
    torch.manual_seed(seed)
    if config.n_nodes == 0:
        return build_classical_model(n_inputs, n_outputs, config, task=task, seed=seed)
    pool = rotation_pool(config)
    n_classes = max(n_outputs, 2)
    nodes = [
        QuantumNode(
            build_qpie_vqc(config.qubits_per_node, n_classes, pool, config.ppel_layers),
            seed=seed * 1_000 + i,
        )
        for i in range(config.n_nodes)
    ]
    n_features = sum(node.n_features for node in nodes)
    frontend = DenseNet(n_inputs, n_features, config.hidden, config.dropout) if config.frontend else None
    if frontend is None and n_inputs != n_features:
        raise TrainingError(f"without a frontend the input width {n_inputs} must equal {n_features} features")
    return HybridModel(nodes, n_outputs, frontend=frontend, n_inputs=n_inputs, task=task)


def build_classical_model(
    n_inputs: int,
    n_outputs: int,
    config: ModelConfig | None = None,
    *,
    task: Task = "classification",
    seed: int = 0,
) -> HybridModel:
    """Dense network and head only; the benchmark without quantum nodes."""
    config = config if config is not None else ModelConfig(n_nodes=0)
    torch.manual_seed(seed)
    frontend = DenseNet(n_inputs, config.hidden[-1], config.hidden, config.dropout)
    return HybridModel([], n_outputs, frontend=frontend, task=task)


def cross_entropy(pred: Any, label: Any) -> torch.Tensor:
    """Mean of -ln pred[label]; probabilities below 1e-12 are clamped and reported."""
    pred = torch.as_tensor(pred, dtype=DTYPE)
    label = torch.as_tensor(label, dtype=torch.long)
    if pred.ndim == 1:
        pred, label = pred.unsqueeze(0), label.reshape(1)
    if label.min() < 0 or label.max() >= pred.shape[1]:
        raise TrainingError(f"labels must lie in [0, {pred.shape[1]})")
    picked = pred.gather(1, label.unsqueeze(1)).squeeze(1)
    clamped = int((picked < PROB_FLOOR).sum())
    if clamped:
        logger.warning("cross-entropy: %d probabilities clamped to %.0e", clamped, PROB_FLOOR)
    return -torch.log(picked.clamp_min(PROB_FLOOR)).mean()
