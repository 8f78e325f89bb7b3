"""Full-batch training loop, transfer pre-training and AAO growth of the nodes."""
from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from app.modules.data import Dataset
from app.modules.grad import CandidatePool, aao_step
from app.modules.hybrid.model import (
    DTYPE,
    AnyBackend,
    DenseNet,
    HybridModel,
    TrainingError,
    cross_entropy,
    forward,
)
from app.modules.hybrid.schemas import TrainConfig

logger = logging.getLogger(__name__)

TargetSchedule = Callable[[int], np.ndarray]


@dataclass
class TrainTrace:
    loss: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)
    grad_norm: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.loss)

    def as_columns(self) -> dict[str, list]:
        return {
            "epoch": list(range(len(self.loss))),
            "loss": self.loss,
            "accuracy": self.accuracy,
            "grad_norm": self.grad_norm,
            "lr": self.lr,
        }


def _tensors(model: HybridModel, dataset: Dataset) -> tuple[torch.Tensor, torch.Tensor]:
    if dataset.n_samples == 0:
        raise TrainingError("dataset is empty")
    x = torch.as_tensor(dataset.features, dtype=DTYPE)
    if model.task == "classification":
        if dataset.n_classes < 1 or dataset.labels.max() >= model.n_outputs:
            raise TrainingError(f"labels exceed the model's {model.n_outputs} outputs")
        return x, torch.as_tensor(dataset.labels, dtype=torch.long)
    return x, torch.as_tensor(dataset.labels, dtype=DTYPE)


def _loss(model: HybridModel, out: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    if model.task == "classification":
        return cross_entropy(out, target)
    return torch.mean((out - target) ** 2)


def _optimizer(params: list[nn.Parameter], config: TrainConfig) -> torch.optim.Optimizer:
    if config.optimizer == "sgd":
        return torch.optim.SGD(params, lr=config.lr)
    return torch.optim.Adam(params, lr=config.lr, betas=(0.9, 0.999), eps=1e-8)


def train(
    model: HybridModel,
    dataset: Dataset,
    config: TrainConfig,
    *,
    target_schedule: TargetSchedule | None = None,
) -> tuple[HybridModel, TrainTrace]:
    """Full-batch training; the learning rate is multiplied by ``gamma`` every ``decay_every`` epochs.

    ``target_schedule(epoch)`` replaces the regression target for that epoch
    (the NARMA noisy targets). Frozen frontend layers stay out of the optimizer.
    """
    x, y = _tensors(model, dataset)
    torch.manual_seed(config.seed)
    model.set_backend(config.backend)
    if config.aao_steps and len(model.nodes):
        grow_quantum_nodes(model, x, y, config.aao_steps)

    trace = TrainTrace()
    params = [p for p in model.parameters() if p.requires_grad]
    if config.epochs == 0 or not params:
        return model, trace
    optimizer = _optimizer(params, config)
    scheduler = torch.optim.lr_scheduler.StepLR(optimizer, step_size=config.decay_every, gamma=config.gamma)

    model.train()
    for epoch in range(config.epochs):
        target = y
        if target_schedule is not None:
            target = torch.as_tensor(np.asarray(target_schedule(epoch), dtype=np.float64), dtype=DTYPE)
        optimizer.zero_grad()
        out = model(x)
        loss = _loss(model, out, target)
        if not torch.isfinite(loss):
            raise TrainingError(f"non-finite loss at epoch {epoch} (seed={config.seed})")
        loss.backward()
        squares = [torch.sum(p.grad**2) for p in params if p.grad is not None]
        grad_norm = float(torch.sqrt(torch.stack(squares).sum())) if squares else 0.0
        lr = optimizer.param_groups[0]["lr"]
        optimizer.step()
        scheduler.step()

        trace.loss.append(float(loss.detach()))
        trace.grad_norm.append(grad_norm)
        trace.lr.append(float(lr))
        if model.task == "classification":
            trace.accuracy.append(float((out.detach().argmax(dim=1) == y).double().mean()))
        else:
            trace.accuracy.append(float("nan"))
        logger.debug("epoch %d: loss=%.6g grad_norm=%.3g", epoch, trace.loss[-1], grad_norm)
        if config.log_every and (epoch + 1) % config.log_every == 0:
            logger.info(
                "epoch %d/%d loss=%.4f accuracy=%.4f lr=%.2g",
                epoch + 1,
                config.epochs,
                trace.loss[-1],
                trace.accuracy[-1],
                lr,
            )
    model.eval()
    return model, trace


def accuracy(model: HybridModel, dataset: Dataset, backend: AnyBackend | None = None) -> float:
    """Evaluation-mode accuracy on ``dataset``; ``backend`` switches the nodes first."""
    probs = forward(model, dataset.features, backend)
    return float(np.mean(np.argmax(probs, axis=1) == dataset.labels))


def pretrain_transfer(
    frontend: DenseNet,
    source_task: Dataset,
    freeze_first: int,
    config: TrainConfig | None = None,
) -> DenseNet:
    """Train ``frontend`` under a temporary head on ``source_task``, then freeze its first layers."""
    if not 0 <= freeze_first < len(frontend.layers):
        raise TrainingError(f"freeze_first must be in [0, {len(frontend.layers)}), got {freeze_first}")
    config = config if config is not None else TrainConfig(epochs=50, log_every=0)
    probe = HybridModel([], source_task.n_classes, frontend=frontend)
    train(probe, source_task, config)
    frontend.freeze(freeze_first)
    logger.info("Pre-trained frontend on %s; froze %d layers", source_task.meta.get("name", "source"), freeze_first)
    return frontend


def grow_quantum_nodes(
    model: HybridModel,
    x: torch.Tensor,
    y: torch.Tensor,
    steps: int,
    pool: CandidatePool | None = None,
) -> HybridModel:
    """Append ``steps`` AAO-chosen gates to every node.

    Candidates are scored against the current loss: the observable weights
    are d(loss)/d(expectation) for the node being grown.
    """
    model.eval()
    with torch.no_grad():
        inputs = [feats.detach() for feats in model.node_inputs(x)]
    for i, node in enumerate(model.nodes):
        node_pool = pool if pool is not None else CandidatePool.default(node.circuit.data_qubits)
        for _ in range(steps):
            with torch.no_grad():
                parts = [n(f) for n, f in zip(model.nodes, inputs, strict=True)]
            leaf = parts[i].clone().requires_grad_(True)
            parts[i] = leaf
            loss = _loss(model, model.head_output(torch.cat(parts, dim=1)), y)
            (weights,) = torch.autograd.grad(loss, leaf)
            circuit, theta = aao_step(
                node.circuit,
                node.theta.detach().numpy(),
                inputs[i].numpy(),
                node.backend,
                node.observables,
                node_pool,
                weights=weights.numpy(),
            )
            node.replace(circuit, theta)
    model.train()
    return model
