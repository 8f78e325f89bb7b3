"""Gate constructors, parameter slots and analytic derivatives."""
from app.modules.gates.services import (
    CONTROLLED,
    FOUR_TERM,
    ROTATIONS,
    TWO_TERM,
    Embedded,
    Fixed,
    GateError,
    GateKind,
    GateOp,
    ParamSlot,
    Trainable,
    block_derivative,
    cyz,
    decompose,
    matrix_of,
    param_derivative,
    shift_rule,
    target_block,
)

__all__ = [
    "CONTROLLED",
    "FOUR_TERM",
    "ROTATIONS",
    "TWO_TERM",
    "Embedded",
    "Fixed",
    "GateError",
    "GateKind",
    "GateOp",
    "ParamSlot",
    "Trainable",
    "block_derivative",
    "cyz",
    "decompose",
    "matrix_of",
    "param_derivative",
    "shift_rule",
    "target_block",
]
