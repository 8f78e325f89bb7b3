"""Dataset selection shared by the training commands."""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


class DatasetSpec(BaseModel):
    """Which generator to call and with what arguments."""

    model_config = ConfigDict(extra="forbid")

    name: Literal["moon", "spiral", "circles"] = Field("moon", description="Generator")
    n: int = Field(600, ge=2, description="Number of points (even)")
    noise_sd: float = Field(0.1, ge=0.0, description="Gaussian noise standard deviation")
    turns: float = Field(1.5, gt=0.0, description="Spiral turns (spiral only)")
    factor: float = Field(0.5, gt=0.0, lt=1.0, description="Inner/outer radius ratio (circles only)")
    outliers: int = Field(0, ge=0, description="Mislabeled points at the arc midpoints (moon only)")
    shuffle: bool = Field(True, description="Shuffle rows")
    seed: int = Field(0, description="Generator seed")

    @model_validator(mode="after")
    def _check_even(self) -> DatasetSpec:
        if self.n % 2:
            raise ValueError("n must be even")
        return self
