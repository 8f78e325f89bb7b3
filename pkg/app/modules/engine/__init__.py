"""Circuit execution backends: analytic, sampled and noisy density matrix."""
import argparse

from app.modules.engine.commands import register_commands
from app.modules.engine.schemas import (
    AnalyticSV,
    Backend,
    NoiseSpec,
    NoiseSweepConfig,
    NoisyDM,
    SampledSV,
    backend_from_name,
)
from app.modules.engine.services import (
    EngineError,
    ExecutionContext,
    Instruction,
    RunResult,
    ZString,
    apply_block,
    apply_channel,
    as_observables,
    closed_form_z,
    decode_prediction,
    noise_sweep,
    prepare_inputs,
    run,
    softmax,
)

MODULE_META = {
    "id": "engine",
    "name": "Execution engine",
    "description": "Run circuits on analytic, sampled and noisy backends",
    "commands": {"noise-sweep": NoiseSweepConfig},
}


def register(subparsers: argparse._SubParsersAction) -> None:
    register_commands(subparsers)


__all__ = [
    "AnalyticSV",
    "Backend",
    "EngineError",
    "ExecutionContext",
    "Instruction",
    "NoiseSpec",
    "NoisyDM",
    "RunResult",
    "SampledSV",
    "ZString",
    "apply_block",
    "apply_channel",
    "as_observables",
    "backend_from_name",
    "closed_form_z",
    "decode_prediction",
    "noise_sweep",
    "prepare_inputs",
    "run",
    "softmax",
]
