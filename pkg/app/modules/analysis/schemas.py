"""Pydantic schema for the ``fim`` command."""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from app.modules.data.schemas import DatasetSpec
from app.modules.engine.schemas import AnalyticSV, Backend
from app.modules.hybrid.schemas import ModelConfig


class FimConfig(BaseModel):
    """Empirical Fisher spectra of a classical and a hybrid model on the same data."""

    model_config = ConfigDict(extra="forbid")

    dataset: DatasetSpec = Field(default_factory=lambda: DatasetSpec(n=200))
    model: ModelConfig = Field(default_factory=ModelConfig)
    checkpoint: str | None = Field(
        None, description="Hybrid model checkpoint from `qpie train`; replaces the fresh hybrid model"
    )
    train_epochs: int = Field(
        0, ge=0, description="Training epochs before the Fisher estimate (0 = at init); not applied to a checkpoint"
    )
    lr: float = Field(0.01, gt=0.0)
    scope: Literal["quantum", "all"] = Field("all", description="Hybrid parameters entering the estimate")
    max_params: int = Field(100, ge=1, description="Leading parameters kept")
    max_samples: int | None = Field(200, ge=1, description="Leading samples used (None = all)")
    bins: int = Field(50, ge=1, description="Spectrum density bins")
    backend: Backend = Field(default_factory=AnalyticSV)
    seed: int = 0
