"""Pydantic schemas for the hybrid model, training loop and VQE."""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.modules.data.schemas import DatasetSpec
from app.modules.engine.schemas import AnalyticSV, Backend, NoisyDM


class ModelConfig(BaseModel):
    """Shape of the hybrid network."""

    model_config = ConfigDict(extra="forbid")

    n_nodes: int = Field(3, ge=0, description="Parallel quantum nodes (0 gives the classical baseline)")
    qubits_per_node: int = Field(4, ge=2, le=10, description="Data qubits per node")
    ppel_layers: int = Field(6, ge=0, description="Entangling layers per node (3 per full flag cycle)")
    frontend: bool = Field(True, description="Dense frontend before the quantum nodes")
    hidden: list[int] = Field(default_factory=lambda: [32, 32, 16, 16], min_length=4, max_length=4)
    dropout: float = Field(0.2, ge=0.0, lt=1.0, description="Alpha-dropout rate after layers 2 and 5")
    pool_order: list[int] = Field(
        default_factory=lambda: [0, 1, 2],
        min_length=3,
        max_length=3,
        description="Rotation chosen per branch: 0=RX, 1=RY, 2=RZ",
    )
    tau_low: float = Field(1.0 / 3.0, gt=0.0, lt=1.0)
    tau_high: float = Field(2.0 / 3.0, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_pool(self) -> ModelConfig:
        if sorted(self.pool_order) != [0, 1, 2]:
            raise ValueError("pool_order must be a permutation of [0, 1, 2]")
        if not self.tau_low < self.tau_high:
            raise ValueError("tau_low must be below tau_high")
        if not self.frontend and self.n_nodes == 0:
            raise ValueError("a model needs a frontend or at least one quantum node")
        return self


class TrainConfig(BaseModel):
    """Optimizer and schedule for ``train``."""

    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(100, ge=0, description="Full-batch epochs")
    lr: float = Field(0.01, gt=0.0, description="Initial learning rate")
    gamma: float = Field(0.1, gt=0.0, le=1.0, description="Step-decay factor")
    decay_every: int = Field(50, ge=1, description="Epochs between learning-rate decays")
    optimizer: Literal["adam", "sgd"] = Field("adam", description="Classical optimizer")
    aao_steps: int = Field(0, ge=0, description="AAO growth steps per node before training")
    log_every: int = Field(10, ge=0, description="INFO progress interval in epochs (0 = silent)")
    backend: Backend = Field(default_factory=AnalyticSV, description="Execution backend")
    seed: int = Field(0, description="Initialisation, dropout and sampling seed")


class PretrainConfig(BaseModel):
    """Frontend pre-training on a source task before the quantum nodes are attached."""

    model_config = ConfigDict(extra="forbid")

    source: DatasetSpec = Field(default_factory=lambda: DatasetSpec(name="circles", noise_sd=0.05))
    epochs: int = Field(50, ge=0)
    lr: float = Field(0.01, gt=0.0)
    freeze_first: int = Field(2, ge=0, le=4, description="Leading dense layers frozen afterwards")


class TrainCommandConfig(TrainConfig):
    """Config for ``qpie train``."""

    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    model: ModelConfig = Field(default_factory=ModelConfig)
    pretrain: PretrainConfig | None = Field(None, description="Optional transfer-learning stage")
    evaluate_on: list[Backend] = Field(
        default_factory=lambda: [NoisyDM()], description="Extra backends the trained model is scored on"
    )
    boundary_grid: int = Field(200, ge=2, le=1000, description="Decision-boundary grid points per axis")

    def train_config(self) -> TrainConfig:
        return TrainConfig.model_validate(self.model_dump(include=set(TrainConfig.model_fields)))


class NarmaCommandConfig(TrainConfig):
    """Config for ``qpie narma``: regression on NARMA windows with decaying target noise."""

    order: Literal[5, 10] = Field(5, description="NARMA order")
    steps: int = Field(100, ge=1, description="Predicted time steps")
    lags: int | None = Field(None, ge=1, description="Input window (default: the order)")
    alpha: float | None = Field(None, ge=0.0, description="Noise scale (default 0.1 / 0.2 by order)")
    model: ModelConfig = Field(default_factory=lambda: ModelConfig(n_nodes=1, dropout=0.0, ppel_layers=3))
    lr: float = Field(0.002, gt=0.0)

    @property
    def length(self) -> int:
        """Series length: the predicted steps plus one input window."""
        return self.steps + (self.lags if self.lags is not None else self.order)

    def train_config(self) -> TrainConfig:
        return TrainConfig.model_validate(self.model_dump(include=set(TrainConfig.model_fields)))


class ZTerm(BaseModel):
    model_config = ConfigDict(extra="forbid")

    qubits: list[int] = Field(..., min_length=1)
    coeff: float = 1.0


class VqeConfig(BaseModel):
    """Config for ``qpie vqe`` and ``vqe_minimize``."""

    model_config = ConfigDict(extra="forbid")

    n_qubits: int = Field(2, ge=1, le=12)
    hamiltonian: list[ZTerm] = Field(
        default_factory=lambda: [ZTerm(qubits=[0]), ZTerm(qubits=[1])],
        min_length=1,
        description="Sum of weighted Z-strings",
    )
    lr: float = Field(0.2, gt=0.0)
    optimizer: Literal["sgd", "adam"] = "sgd"
    threshold: float = Field(1e-6, gt=0.0, description="Energy change counted as stalled")
    patience: int = Field(5, ge=1, description="Consecutive stalled iterations before stopping")
    max_iter: int = Field(500, ge=0)
    backend: Backend = Field(default_factory=AnalyticSV)
    seed: int = 0

    @model_validator(mode="after")
    def _check_terms(self) -> VqeConfig:
        for term in self.hamiltonian:
            if any(not 0 <= q < self.n_qubits for q in term.qubits):
                raise ValueError(f"hamiltonian term {term.qubits} outside the {self.n_qubits}-qubit register")
            if len(set(term.qubits)) != len(term.qubits):
                raise ValueError(f"hamiltonian term {term.qubits} repeats a qubit")
        return self
