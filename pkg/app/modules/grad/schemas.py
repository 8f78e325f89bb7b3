"""Pydantic schemas for the gradient-check and AAO commands."""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.modules.engine.schemas import AnalyticSV, Backend

MethodName = Literal["param_shift", "adjoint", "finite_diff"]


class GradcheckConfig(BaseModel):
    """Config for ``qpie gradcheck``: seeded random circuits, methods compared pairwise."""

    model_config = ConfigDict(extra="forbid")

    n_circuits: int = Field(50, ge=1, description="Random circuits to check")
    min_qubits: int = Field(1, ge=1, description="Smallest register")
    max_qubits: int = Field(6, ge=1, le=12, description="Largest register")
    max_params: int = Field(30, ge=1, description="Largest trainable count")
    conditional: bool = Field(False, description="Add a mid-circuit measurement and conditional rotation")
    methods: list[MethodName] = Field(
        default_factory=lambda: ["param_shift", "adjoint", "finite_diff"],
        min_length=2,
        description="Gradient engines to compare",
    )
    fd_step: float = Field(1e-5, gt=0.0, description="Finite-difference step")
    tolerance: float = Field(1e-6, gt=0.0, description="Largest allowed pairwise deviation")
    backend: Backend = Field(default_factory=AnalyticSV, description="Execution backend")
    seed: int = Field(0, description="Circuit and angle seed")

    @model_validator(mode="after")
    def _check_ranges(self) -> GradcheckConfig:
        if self.min_qubits > self.max_qubits:
            raise ValueError("min_qubits must not exceed max_qubits")
        if self.conditional and self.max_qubits < 2:
            raise ValueError("conditional circuits need max_qubits >= 2")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("methods must not repeat")
        return self


class AaoGrowConfig(BaseModel):
    """Config for ``qpie aao-grow``: greedy growth of a circuit toward a Z-string cost."""

    model_config = ConfigDict(extra="forbid")

    n_qubits: int = Field(3, ge=1, le=12, description="Register size")
    steps: int = Field(5, ge=1, description="Gates to append")
    observable_qubits: list[int] = Field(default_factory=lambda: [0], min_length=1, description="Z-string qubits")
    initial_hadamards: bool = Field(True, description="Start from H on every qubit")
    lr: float = Field(0.2, gt=0.0, description="Gradient-descent step after each growth")
    inner_steps: int = Field(20, ge=0, description="Descent steps after each growth")
    backend: Backend = Field(default_factory=AnalyticSV, description="Execution backend")
    seed: int = Field(0, description="Recorded in the artifact header")

    @model_validator(mode="after")
    def _check_qubits(self) -> AaoGrowConfig:
        if any(not 0 <= q < self.n_qubits for q in self.observable_qubits):
            raise ValueError("observable_qubits must lie inside the register")
        if len(set(self.observable_qubits)) != len(self.observable_qubits):
            raise ValueError("observable_qubits must not repeat")
        return self
