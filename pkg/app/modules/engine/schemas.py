"""Pydantic schemas for execution backends and the noise-sweep command."""
from __future__ import annotations

from typing import Annotated, Any, Literal

from pydantic import BaseModel, ConfigDict, Field


class NoiseSpec(BaseModel):
    """Per-gate error probabilities, applied to every touched qubit."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    p_depol: float = Field(0.01, ge=0.0, le=1.0, description="Depolarizing probability")
    p_bitflip: float = Field(0.01, ge=0.0, le=1.0, description="Bit-flip probability")
    p_phaseflip: float = Field(0.01, ge=0.0, le=1.0, description="Phase-flip probability")

    @property
    def is_zero(self) -> bool:
        return self.p_depol == 0.0 and self.p_bitflip == 0.0 and self.p_phaseflip == 0.0


class AnalyticSV(BaseModel):
    """Exact statevector expectations."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["analytic"] = "analytic"


class SampledSV(BaseModel):
    """Statevector with shot-sampled read-out. ``shots=None`` means 2**n."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["sampled"] = "sampled"
    shots: int | None = Field(None, ge=1, description="Shots per execution (default 2**n_qubits)")
    seed: int = Field(0, description="Sampling seed")


class NoisyDM(BaseModel):
    """Density matrix with per-gate noise channels."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["noisy"] = "noisy"
    noise: NoiseSpec = Field(default_factory=NoiseSpec, description="Channel probabilities")
    seed: int = Field(0, description="Recorded seed (channels are applied exactly)")


Backend = Annotated[AnalyticSV | SampledSV | NoisyDM, Field(discriminator="kind")]

BACKEND_NAMES = ("analytic", "sampled", "noisy")


def backend_from_name(name: str, seed: int = 0) -> AnalyticSV | SampledSV | NoisyDM:
    """Default backend for a ``--backend`` flag value."""
    if name == "analytic":
        return AnalyticSV()
    if name == "sampled":
        return SampledSV(seed=seed)
    if name == "noisy":
        return NoisyDM(seed=seed)
    raise ValueError(f"unknown backend {name!r}; expected one of {', '.join(BACKEND_NAMES)}")


ChannelName = Literal["depolarizing", "bit_flip", "phase_flip"]


class NoiseSweepConfig(BaseModel):
    """Config for ``qpie noise-sweep``."""

    model_config = ConfigDict(extra="forbid")

    channels: list[ChannelName] = Field(
        default_factory=lambda: ["depolarizing", "bit_flip", "phase_flip"],
        min_length=1,
        description="Channels to sweep",
    )
    probabilities: list[Annotated[float, Field(ge=0.0, le=1.0)]] = Field(
        default_factory=lambda: [round(0.1 * k, 10) for k in range(11)],
        min_length=1,
        description="Error probabilities",
    )
    seed: int = Field(0, description="Recorded in the artifact header")


def cli_overrides(args: Any) -> dict[str, Any]:
    """Config overrides from the shared ``--seed`` / ``--backend`` flags."""
    overrides: dict[str, Any] = {"seed": getattr(args, "seed", None)}
    name = getattr(args, "backend", None)
    if name:
        overrides["backend"] = backend_from_name(name, overrides["seed"] or 0).model_dump()
    return overrides
