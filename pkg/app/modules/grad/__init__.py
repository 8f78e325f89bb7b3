"""Gradient engines, backend dispatch and angle-adaptive circuit growth."""
import argparse

from app.modules.grad.commands import register_commands
from app.modules.grad.schemas import AaoGrowConfig, GradcheckConfig
from app.modules.grad.services import (
    Candidate,
    CandidatePool,
    DispatchError,
    GradientError,
    GradientVector,
    GradMethod,
    aao_scores,
    aao_step,
    extend,
    grad_adjoint,
    grad_dispatch,
    grad_finite_diff,
    grad_param_shift,
    gradient,
    max_deviation,
    shot_sigma,
)

MODULE_META = {
    "id": "grad",
    "name": "Gradients",
    "description": "Parameter-shift, adjoint and finite-difference gradients; AAO growth",
    "commands": {"gradcheck": GradcheckConfig, "aao-grow": AaoGrowConfig},
}


def register(subparsers: argparse._SubParsersAction) -> None:
    register_commands(subparsers)


__all__ = [
    "Candidate",
    "CandidatePool",
    "DispatchError",
    "GradMethod",
    "GradientError",
    "GradientVector",
    "aao_scores",
    "aao_step",
    "extend",
    "grad_adjoint",
    "grad_dispatch",
    "grad_finite_diff",
    "grad_param_shift",
    "gradient",
    "max_deviation",
    "shot_sigma",
]
