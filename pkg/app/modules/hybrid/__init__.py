"""Hybrid classical-quantum networks, training loop, VQE and checkpoints."""
import argparse

from app.modules.hybrid.checkpoint import (
    checkpoint_document,
    load_checkpoint,
    model_from_document,
    save_checkpoint,
)
from app.modules.hybrid.commands import decision_boundary, register_commands
from app.modules.hybrid.model import (
    DenseNet,
    HybridModel,
    QuantumNode,
    TrainingError,
    build_classical_model,
    build_hybrid_model,
    cross_entropy,
    forward,
    rotation_pool,
)
from app.modules.hybrid.schemas import (
    ModelConfig,
    NarmaCommandConfig,
    PretrainConfig,
    TrainCommandConfig,
    TrainConfig,
    VqeConfig,
    ZTerm,
)
from app.modules.hybrid.training import TrainTrace, accuracy, grow_quantum_nodes, pretrain_transfer, train
from app.modules.hybrid.vqe import VqeResult, ground_energy, hamiltonian_matrix, vqe_minimize

MODULE_META = {
    "id": "hybrid",
    "name": "Hybrid networks",
    "description": "Dense frontend with parallel quantum nodes; training, NARMA regression and VQE",
    "commands": {"train": TrainCommandConfig, "narma": NarmaCommandConfig, "vqe": VqeConfig},
}


def register(subparsers: argparse._SubParsersAction) -> None:
    register_commands(subparsers)


__all__ = [
    "DenseNet",
    "HybridModel",
    "ModelConfig",
    "NarmaCommandConfig",
    "PretrainConfig",
    "QuantumNode",
    "TrainCommandConfig",
    "TrainConfig",
    "TrainTrace",
    "TrainingError",
    "VqeConfig",
    "VqeResult",
    "ZTerm",
    "accuracy",
    "build_classical_model",
    "build_hybrid_model",
    "checkpoint_document",
    "cross_entropy",
    "decision_boundary",
    "forward",
    "ground_energy",
    "grow_quantum_nodes",
    "hamiltonian_matrix",
    "load_checkpoint",
    "model_from_document",
    "pretrain_transfer",
    "rotation_pool",
    "save_checkpoint",
    "train",
    "vqe_minimize",
]
