"""Circuit intermediate representation.

A ``ParamCircuit`` is an immutable, ordered program of gate nodes,
mid-circuit measurements and conditional rotations. Register values are
per-execution state and never live on the circuit.
"""
from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from app.core.config import settings
from app.modules.gates import (
    ROTATIONS,
    Embedded,
    Fixed,
    GateKind,
    GateOp,
    ParamSlot,
    Trainable,
    decompose,
)


class CircuitError(ValueError):
    """Raised when a circuit is structurally invalid."""


# ---------------------------------------------------------------------------
# Rotation-type pool
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RotationPool:
    """Three-way RX/RY/RZ choice keyed on a measured value.

    The branch index ``b`` (0 below ``tau_low``, 1 up to ``tau_high``, 2 from
    ``tau_high`` on) selects column ``b`` of ``one_hot``; the row holding the 1
    names the rotation. The identity matrix gives RX, RY, RZ in branch order.
    """

    one_hot: tuple[tuple[int, int, int], ...] = ((1, 0, 0), (0, 1, 0), (0, 0, 1))
    tau_low: float = field(default_factory=lambda: settings.TAU_LOW)
    tau_high: float = field(default_factory=lambda: settings.TAU_HIGH)

    def __post_init__(self) -> None:
        matrix = np.asarray(self.one_hot)
        if matrix.shape != (3, 3) or not np.isin(matrix, (0, 1)).all():
            raise CircuitError("rotation pool one_hot must be a 3x3 binary matrix")
        if not (matrix.sum(axis=0) == 1).all() or not (matrix.sum(axis=1) == 1).all():
            raise CircuitError("rotation pool one_hot must be a permutation matrix")
        if not 0.0 < self.tau_low < self.tau_high < 1.0:
            raise CircuitError(
                f"thresholds must satisfy 0 < tau_low < tau_high < 1, got {self.tau_low}, {self.tau_high}"
            )
        object.__setattr__(self, "one_hot", tuple(tuple(int(v) for v in row) for row in self.one_hot))

    def branch(self, meas: np.ndarray | float) -> np.ndarray:
        """Branch index 0/1/2 for each measured value.

        No branch skips the rotation. With the identity pool a switch reading
        below ``tau_low`` still applies RX and one below ``tau_high`` applies RY;
        only a reading of at least ``tau_high`` counts as "on" and applies RZ.
        """
        meas = np.asarray(meas, dtype=np.float64)
        if np.any(~np.isfinite(meas)) or np.any(meas < 0.0) or np.any(meas > 1.0):
            raise CircuitError(f"measured value outside [0, 1]: {meas}")
        return np.where(meas < self.tau_low, 0, np.where(meas < self.tau_high, 1, 2))

    def rotation_for(self, branch: int) -> GateKind:
        column = [row[int(branch)] for row in self.one_hot]
        return ROTATIONS[column.index(1)]


# ---------------------------------------------------------------------------
# Nodes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeasRegister:
    """Classical register written by a MidMeasure; ``value`` is per execution."""

    id: int
    value: float | None = None

    @property
    def is_set(self) -> bool:
        return self.value is not None


@dataclass(frozen=True)
class GateNode:
    op: GateOp


@dataclass(frozen=True)
class MidMeasure:
    qubit: int
    register: int


@dataclass(frozen=True)
class Conditional:
    register: int
    pool: RotationPool
    target: int
    param: ParamSlot


@dataclass(frozen=True)
class Barrier:
    pass


CircuitNode = GateNode | MidMeasure | Conditional | Barrier


def evaluate_conditional(node: Conditional, meas: float) -> GateKind:
    """Rotation kind the conditional applies for a register value ``meas``."""
    return node.pool.rotation_for(int(node.pool.branch(meas)))


# ---------------------------------------------------------------------------
# Circuit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlotUse:
    """One parameter occurrence, in engine traversal order.

    ``kind`` is the primitive gate kind, or ``None`` for a conditional rotation
    whose kind is decided at run time.
    """

    node: int
    slot: ParamSlot
    kind: GateKind | None


def _slots(node: CircuitNode) -> Iterator[tuple[ParamSlot, GateKind | None]]:
    if isinstance(node, GateNode):
        for prim in decompose(node.op):
            for slot in prim.params:
                yield slot, prim.kind
    elif isinstance(node, Conditional):
        yield node.param, None


def _qubits(node: CircuitNode) -> tuple[int, ...]:
    if isinstance(node, GateNode):
        return node.op.targets
    if isinstance(node, MidMeasure):
        return (node.qubit,)
    if isinstance(node, Conditional):
        return (node.target,)
    return ()


@dataclass(frozen=True)
class ParamCircuit:
    """Ordered program over ``n_data_qubits + n_ancilla`` qubits.

    Data qubits come first; the first ``n_readout`` ancillas are prediction
    ancillas and any further ancilla is a switch.
    """

    n_data_qubits: int
    n_ancilla: int
    nodes: tuple[CircuitNode, ...]
    n_trainable: int
    n_features: int
    n_readout: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        self.validate()

    @property
    def n_qubits(self) -> int:
        return self.n_data_qubits + self.n_ancilla

    @property
    def data_qubits(self) -> range:
        return range(self.n_data_qubits)

    @property
    def readout_qubits(self) -> range:
        return range(self.n_data_qubits, self.n_data_qubits + self.n_readout)

    def validate(self) -> None:
        if self.n_data_qubits < 0 or self.n_ancilla < 0 or self.n_qubits < 1:
            raise CircuitError("circuit needs at least one qubit")
        if not 0 <= self.n_readout <= self.n_ancilla:
            raise CircuitError(f"n_readout={self.n_readout} exceeds n_ancilla={self.n_ancilla}")
        if self.n_trainable < 0 or self.n_features < 0:
            raise CircuitError("n_trainable and n_features must be >= 0")

        used: set[int] = set()
        written: set[int] = set()
        for pos, node in enumerate(self.nodes):
            if not isinstance(node, GateNode | MidMeasure | Conditional | Barrier):
                raise CircuitError(f"node {pos}: unknown node type {type(node).__name__}")
            for q in _qubits(node):
                if not 0 <= q < self.n_qubits:
                    raise CircuitError(f"node {pos}: qubit {q} outside [0, {self.n_qubits})")
            if isinstance(node, MidMeasure):
                if self.n_ancilla < 1:
                    raise CircuitError("mid-circuit measurement requires at least one ancilla")
                written.add(node.register)
            if isinstance(node, Conditional) and node.register not in written:
                raise CircuitError(f"node {pos}: conditional reads register {node.register} before it is written")
            for slot, _ in _slots(node):
                if isinstance(slot, Trainable):
                    if slot.index >= self.n_trainable:
                        raise CircuitError(f"node {pos}: trainable index {slot.index} >= {self.n_trainable}")
                    used.add(slot.index)
                elif isinstance(slot, Embedded) and slot.index >= self.n_features:
                    raise CircuitError(f"node {pos}: feature index {slot.index} >= {self.n_features}")
        missing = set(range(self.n_trainable)) - used
        if missing:
            raise CircuitError(f"trainable indices never used: {sorted(missing)}")

    @cached_property
    def slot_uses(self) -> tuple[SlotUse, ...]:
        """Every non-fixed parameter occurrence in traversal order."""
        return tuple(
            SlotUse(pos, slot, kind)
            for pos, node in enumerate(self.nodes)
            for slot, kind in _slots(node)
            if not isinstance(slot, Fixed)
        )

    @property
    def has_mid_measure(self) -> bool:
        return any(isinstance(node, MidMeasure) for node in self.nodes)

    def gate_count(self) -> int:
        """Primitive gates plus conditional rotations."""
        total = 0
        for node in self.nodes:
            if isinstance(node, GateNode):
                total += len(decompose(node.op))
            elif isinstance(node, Conditional):
                total += 1
        return total

    def default_observables(self) -> list:
        """Z on each prediction ancilla, then Z on each data qubit."""
        from app.modules.engine.services import ZString

        qubits = list(self.readout_qubits) + list(self.data_qubits)
        return [ZString((q,)) for q in qubits]

    def feature_ranges(self) -> list[tuple[float, float]]:
        """Declared angle range per feature index (first embedding wins)."""
        ranges: list[tuple[float, float] | None] = [None] * self.n_features
        for use in self.slot_uses:
            if isinstance(use.slot, Embedded) and ranges[use.slot.index] is None:
                ranges[use.slot.index] = (use.slot.lo, use.slot.hi)
        return [r if r is not None else (0.0, math.pi) for r in ranges]

    def with_gate(self, op: GateOp) -> ParamCircuit:
        """Append ``op``; trainable slots beyond the current count grow ``n_trainable``."""
        top = max((s.index + 1 for s in op.params if isinstance(s, Trainable)), default=0)
        return ParamCircuit(
            n_data_qubits=self.n_data_qubits,
            n_ancilla=self.n_ancilla,
            nodes=self.nodes + (GateNode(op),),
            n_trainable=max(self.n_trainable, top),
            n_features=self.n_features,
            n_readout=self.n_readout,
        )


class SlotAllocator:
    """Hands out consecutive trainable indices so builders compose."""

    def __init__(self, start: int = 0) -> None:
        self.next_index = start

    def take(self) -> Trainable:
        slot = Trainable(self.next_index)
        self.next_index += 1
        return slot

    def take_many(self, count: int) -> tuple[Trainable, ...]:
        return tuple(self.take() for _ in range(count))


def as_slot(value: ParamSlot | float) -> ParamSlot:
    if isinstance(value, Trainable | Embedded | Fixed):
        return value
    return Fixed(float(value))


def gate(kind: GateKind | str, *qubits: int, params: Sequence[ParamSlot | float] = ()) -> GateNode:
    """Shorthand for a GateNode."""
    return GateNode(GateOp(GateKind(kind), tuple(qubits), tuple(as_slot(p) for p in params)))
