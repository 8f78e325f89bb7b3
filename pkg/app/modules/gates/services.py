"""Gate vocabulary: matrix constructors, parameter slots and derivatives.

Angles may be scalars or 1-D arrays (one angle per batch row); the
constructors then return ``(2, 2)`` or ``(B, 2, 2)`` blocks. Controlled kinds
use the ``|control, target>`` basis for their full 4x4 matrix, with the
control as the high bit.
"""
from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from app.core.config import settings


class GateError(ValueError):
    """Raised for malformed gates or unsupported gate operations."""


class GateKind(str, Enum):
    H = "H"
    X = "X"
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    R3 = "R3"
    CNOT = "CNOT"
    CRY = "CRY"
    CRZ = "CRZ"
    CYZ = "CYZ"

    @property
    def arity(self) -> int:
        return _ARITY[self]

    @property
    def n_targets(self) -> int:
        return 2 if self in CONTROLLED else 1

    @property
    def controlled(self) -> bool:
        return self in CONTROLLED


_ARITY = {
    GateKind.H: 0,
    GateKind.X: 0,
    GateKind.CNOT: 0,
    GateKind.RX: 1,
    GateKind.RY: 1,
    GateKind.RZ: 1,
    GateKind.CRY: 1,
    GateKind.CRZ: 1,
    GateKind.CYZ: 2,
    GateKind.R3: 3,
}

CONTROLLED = frozenset({GateKind.CNOT, GateKind.CRY, GateKind.CRZ, GateKind.CYZ})
ROTATIONS = (GateKind.RX, GateKind.RY, GateKind.RZ)


# ---------------------------------------------------------------------------
# Parameter slots
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trainable:
    """Angle read from the trainable theta vector."""

    index: int

    def __post_init__(self) -> None:
        if self.index < 0:
            raise GateError(f"trainable index must be >= 0, got {self.index}")


@dataclass(frozen=True)
class Embedded:
    """Angle read from the feature vector; ``lo``/``hi`` is its declared range."""

    index: int
    lo: float = 0.0
    hi: float = math.pi

    def __post_init__(self) -> None:
        if self.index < 0:
            raise GateError(f"feature index must be >= 0, got {self.index}")
        if not self.hi > self.lo:
            raise GateError(f"embedded range must satisfy lo < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class Fixed:
    value: float


ParamSlot = Trainable | Embedded | Fixed


@dataclass(frozen=True)
class GateOp:
    """One gate instance. Controlled kinds list ``(control, target)``."""

    kind: GateKind
    targets: tuple[int, ...]
    params: tuple[ParamSlot, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "targets", tuple(int(q) for q in self.targets))
        object.__setattr__(self, "params", tuple(self.params))
        if len(self.targets) != self.kind.n_targets:
            raise GateError(f"{self.kind.value} takes {self.kind.n_targets} qubit(s), got {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise GateError(f"{self.kind.value} targets must be distinct, got {self.targets}")
        if any(q < 0 for q in self.targets):
            raise GateError(f"negative qubit index in {self.targets}")
        if len(self.params) != self.kind.arity:
            raise GateError(f"{self.kind.value} takes {self.kind.arity} parameter(s), got {len(self.params)}")

    @property
    def control(self) -> int:
        if not self.kind.controlled:
            raise GateError(f"{self.kind.value} has no control qubit")
        return self.targets[0]

    @property
    def target(self) -> int:
        return self.targets[-1]


def decompose(op: GateOp) -> tuple[GateOp, ...]:
    """Primitive gates the engine applies for ``op`` (CYZ splits in two)."""
    if op.kind is GateKind.CYZ:
        return cyz(op.params[0], op.params[1], op.targets[0], op.targets[1])
    return (op,)


def cyz(
    theta_y: float | ParamSlot, theta_z: float | ParamSlot, control: int = 0, target: int = 1
) -> tuple[GateOp, GateOp]:
    """CRY(theta_y) followed by CRZ(theta_z) on one control/target pair."""
    sy = theta_y if isinstance(theta_y, Trainable | Embedded | Fixed) else Fixed(float(theta_y))
    sz = theta_z if isinstance(theta_z, Trainable | Embedded | Fixed) else Fixed(float(theta_z))
    return (
        GateOp(GateKind.CRY, (control, target), (sy,)),
        GateOp(GateKind.CRZ, (control, target), (sz,)),
    )


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2.0)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)


def _block(a: np.ndarray, b: np.ndarray, c: np.ndarray, d: np.ndarray) -> np.ndarray:
    out = np.stack([np.stack([a, b], axis=-1), np.stack([c, d], axis=-1)], axis=-2)
    return out.astype(np.complex128)


def _angles(kind: GateKind, params: Sequence) -> list[np.ndarray]:
    if len(params) != kind.arity:
        raise GateError(f"{kind.value} takes {kind.arity} parameter(s), got {len(params)}")
    if not params:
        return []
    return list(np.broadcast_arrays(*[np.asarray(p, dtype=np.float64) for p in params]))


def _rotation(kind: GateKind, t: np.ndarray) -> np.ndarray:
    c, s = np.cos(t / 2), np.sin(t / 2)
    zero = np.zeros_like(c)
    if kind is GateKind.RX:
        return _block(c + 0j, -1j * s, -1j * s, c + 0j)
    if kind in (GateKind.RY, GateKind.CRY):
        return _block(c, -s, s, c)
    if kind in (GateKind.RZ, GateKind.CRZ):
        return _block(np.exp(-0.5j * t), zero, zero, np.exp(0.5j * t))
    raise GateError(f"{kind.value} is not a single-angle rotation")


def _r3(theta: np.ndarray, phi: np.ndarray, lam: np.ndarray) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return _block(c + 0j, -np.exp(1j * lam) * s, np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c)


def _check(u: np.ndarray) -> np.ndarray:
    prod = np.conj(np.swapaxes(u, -1, -2)) @ u
    dev = float(np.max(np.abs(prod - np.eye(u.shape[-1]))))
    if not math.isfinite(dev) or dev >= settings.UNITARY_TOL:
        raise GateError(f"constructed matrix is not unitary (deviation {dev:.3e})")
    return u


def target_block(kind: GateKind | str, params: Sequence = ()) -> np.ndarray:
    """2x2 block acting on the target (for controlled kinds: when control = 1)."""
    kind = GateKind(kind)
    angles = _angles(kind, params)
    if kind is GateKind.H:
        return _H.copy()
    if kind in (GateKind.X, GateKind.CNOT):
        return _X.copy()
    if kind is GateKind.R3:
        return _check(_r3(*angles))
    if kind is GateKind.CYZ:
        return _check(_rotation(GateKind.CRZ, angles[1]) @ _rotation(GateKind.CRY, angles[0]))
    return _check(_rotation(kind, angles[0]))


def _controlled(block: np.ndarray) -> np.ndarray:
    full = np.zeros(block.shape[:-2] + (4, 4), dtype=np.complex128)
    full[..., 0, 0] = 1.0
    full[..., 1, 1] = 1.0
    full[..., 2:, 2:] = block
    return full


def matrix_of(kind: GateKind | str, params: Sequence = ()) -> np.ndarray:
    """Full unitary of ``kind``: 2x2 for one-qubit kinds, 4x4 for controlled ones."""
    kind = GateKind(kind)
    block = target_block(kind, params)
    return _controlled(block) if kind.controlled else block


def block_derivative(kind: GateKind | str, params: Sequence, which: int) -> np.ndarray:
    """d(target_block)/d(params[which])."""
    kind = GateKind(kind)
    angles = _angles(kind, params)
    if kind.arity == 0:
        raise GateError(f"{kind.value} has no parameters to differentiate")
    if not 0 <= which < kind.arity:
        raise GateError(f"{kind.value} has no parameter {which}")
    if kind is GateKind.R3:
        theta, phi, lam = angles
        c, s = np.cos(theta / 2), np.sin(theta / 2)
        zero = np.zeros_like(c) + 0j
        if which == 0:
            return _block(
                -0.5 * s + 0j,
                -0.5 * np.exp(1j * lam) * c,
                0.5 * np.exp(1j * phi) * c,
                -0.5 * np.exp(1j * (phi + lam)) * s,
            )
        if which == 1:
            return _block(zero, zero, 1j * np.exp(1j * phi) * s, 1j * np.exp(1j * (phi + lam)) * c)
        return _block(zero, -1j * np.exp(1j * lam) * s, zero, 1j * np.exp(1j * (phi + lam)) * c)
    if kind is GateKind.CYZ:
        ry = _rotation(GateKind.CRY, angles[0])
        rz = _rotation(GateKind.CRZ, angles[1])
        if which == 0:
            return rz @ block_derivative(GateKind.CRY, [angles[0]], 0)
        return block_derivative(GateKind.CRZ, [angles[1]], 0) @ ry
    t = angles[0]
    c, s = np.cos(t / 2), np.sin(t / 2)
    zero = np.zeros_like(c) + 0j
    if kind is GateKind.RX:
        return _block(-0.5 * s + 0j, -0.5j * c, -0.5j * c, -0.5 * s + 0j)
    if kind in (GateKind.RY, GateKind.CRY):
        return _block(-0.5 * s, -0.5 * c, 0.5 * c, -0.5 * s)
    return _block(-0.5j * np.exp(-0.5j * t), zero, zero, 0.5j * np.exp(0.5j * t))


def param_derivative(kind: GateKind | str, params: Sequence, which: int) -> np.ndarray:
    """Entrywise dU/d(params[which]) of the full matrix returned by ``matrix_of``."""
    kind = GateKind(kind)
    d = block_derivative(kind, params, which)
    if not kind.controlled:
        return d
    full = np.zeros(d.shape[:-2] + (4, 4), dtype=np.complex128)
    full[..., 2:, 2:] = d
    return full


# ---------------------------------------------------------------------------
# Parameter-shift rules
# ---------------------------------------------------------------------------

# Generator with eigenvalues +-1/2: exact two-term rule.
TWO_TERM: tuple[tuple[float, float], ...] = ((0.5, math.pi / 2), (-0.5, -math.pi / 2))

# Controlled rotations have generator |1><1| (x) sigma/2 with spectrum {-1/2, 0, 1/2}.
_D_PLUS = (math.sqrt(2.0) + 1.0) / (4.0 * math.sqrt(2.0))
_D_MINUS = (math.sqrt(2.0) - 1.0) / (4.0 * math.sqrt(2.0))
FOUR_TERM: tuple[tuple[float, float], ...] = (
    (_D_PLUS, math.pi / 2),
    (-_D_PLUS, -math.pi / 2),
    (-_D_MINUS, 3 * math.pi / 2),
    (_D_MINUS, -3 * math.pi / 2),
)


def shift_rule(kind: GateKind | str | None) -> tuple[tuple[float, float], ...]:
    """(coefficient, shift) pairs giving the exact derivative of an expectation.

    ``None`` stands for a conditional rotation whose kind is picked at run time;
    every kind in the pool is a plain single-qubit rotation.
    """
    if kind is None:
        return TWO_TERM
    kind = GateKind(kind)
    if kind in (GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.R3):
        return TWO_TERM
    if kind in (GateKind.CRY, GateKind.CRZ):
        return FOUR_TERM
    if kind is GateKind.CYZ:
        raise GateError("CYZ has no shift rule of its own; decompose it into CRY and CRZ")
    raise GateError(f"{kind.value} has no trainable parameter")
