"""Circuit builders: symmetric embedding, partial entanglement and the full VQC."""
from __future__ import annotations

import logging
import math

import numpy as np

from app.modules.circuit.ir import (
    CircuitError,
    CircuitNode,
    Conditional,
    GateNode,
    MidMeasure,
    ParamCircuit,
    RotationPool,
    SlotAllocator,
    gate,
)
from app.modules.gates import Embedded, Fixed, GateKind, Trainable, cyz

logger = logging.getLogger(__name__)


def ring_pairs(n: int) -> list[tuple[int, int]]:
    """(q, q + 1 mod n) for every qubit; a single pair when n == 2 is still a ring of two."""
    return [(q, (q + 1) % n) for q in range(n)]


def build_sel(n_qubits: int, feature_offset: int = 0) -> list[CircuitNode]:
    """Hadamard layer, Y-angle embedding in [0, pi], Hadamard layer."""
    if n_qubits < 1:
        raise CircuitError(f"SEL needs at least one qubit, got {n_qubits}")
    nodes: list[CircuitNode] = [gate(GateKind.H, q) for q in range(n_qubits)]
    nodes += [
        gate(GateKind.RY, q, params=[Embedded(feature_offset + q, 0.0, math.pi)]) for q in range(n_qubits)
    ]
    nodes += [gate(GateKind.H, q) for q in range(n_qubits)]
    return nodes


def build_ppel(n_data: int, layers: int, *, allocator: SlotAllocator | None = None) -> list[CircuitNode]:
    """Partial entanglement layers over the data qubits only.

    Layer ``l`` runs branch ``l mod 3``: 0 is a CNOT ring, 1 alternates CRY
    (even pair index) and CYZ (odd pair index) around the ring, 2 is one R3
    per data qubit. Every parameterised gate gets fresh trainable slots.

    There is no ``pool`` argument: PPEL emits only gate nodes. The rotation
    pool drives the conditional block that ``build_qpie_vqc`` places after
    PPEL, and hybrid models derive it from ``ModelConfig.pool_order``.
    """
    if n_data < 2:
        raise CircuitError(f"PPEL needs at least two data qubits, got {n_data}")
    if layers < 1:
        raise CircuitError(f"PPEL needs at least one layer, got {layers}")
    alloc = allocator if allocator is not None else SlotAllocator()
    nodes: list[CircuitNode] = []
    for layer in range(layers):
        flag = layer % 3
        if flag == 0:
            nodes += [gate(GateKind.CNOT, c, t) for c, t in ring_pairs(n_data)]
        elif flag == 1:
            for k, (c, t) in enumerate(ring_pairs(n_data)):
                if k % 2 == 0:
                    nodes.append(gate(GateKind.CRY, c, t, params=[alloc.take()]))
                else:
                    ops = cyz(alloc.take(), alloc.take(), c, t)
                    nodes += [GateNode(op) for op in ops]
        else:
            nodes += [gate(GateKind.R3, q, params=alloc.take_many(3)) for q in range(n_data)]
    return nodes


def n_prediction_ancillas(n_classes: int) -> int:
    return max(math.ceil(math.log2(n_classes)), 1)


def build_qpie_vqc(
    n_data: int,
    n_classes: int,
    pool: RotationPool | None = None,
    ppel_layers: int = 3,
) -> ParamCircuit:
    """Full QPIE circuit.

    Qubit layout: data qubits, then ``ceil(log2 n_classes)`` (at least one)
    prediction ancillas, then one switch ancilla. Node order: SEL, PPEL,
    switch coupling CRY(last data -> switch), MidMeasure(switch), one
    conditional rotation per data qubit, terminal Hadamard layer, readout
    coupling CRY(data q -> prediction ancilla q mod n_pred).
    """
    if n_data < 2:
        raise CircuitError(f"QPIE circuit needs at least two data qubits, got {n_data}")
    if n_classes < 2:
        raise CircuitError(f"QPIE circuit needs at least two classes, got {n_classes}")
    pool = pool if pool is not None else RotationPool()
    n_pred = n_prediction_ancillas(n_classes)
    switch = n_data + n_pred
    alloc = SlotAllocator()

    nodes: list[CircuitNode] = build_sel(n_data)
    nodes += build_ppel(n_data, ppel_layers, allocator=alloc)
    nodes.append(gate(GateKind.CRY, n_data - 1, switch, params=[alloc.take()]))
    nodes.append(MidMeasure(switch, 0))
    nodes += [Conditional(0, pool, q, alloc.take()) for q in range(n_data)]
    nodes += [gate(GateKind.H, q) for q in range(n_data)]
    nodes += [gate(GateKind.CRY, q, n_data + q % n_pred, params=[alloc.take()]) for q in range(n_data)]

    circuit = ParamCircuit(
        n_data_qubits=n_data,
        n_ancilla=n_pred + 1,
        nodes=tuple(nodes),
        n_trainable=alloc.next_index,
        n_features=n_data,
        n_readout=n_pred,
    )
    logger.debug(
        "Built QPIE circuit: %d data + %d ancilla qubits, %d trainables", n_data, n_pred + 1, circuit.n_trainable
    )
    return circuit


def build_ry_product(n_qubits: int) -> ParamCircuit:
    """One trainable RY per qubit, no entanglement."""
    nodes = [gate(GateKind.RY, q, params=[Trainable(q)]) for q in range(n_qubits)]
    return ParamCircuit(n_qubits, 0, tuple(nodes), n_trainable=n_qubits, n_features=0)


_SINGLE = (GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.R3)
_PAIRED = (GateKind.CRY, GateKind.CRZ, GateKind.CYZ)


def build_random_circuit(
    n_qubits: int,
    n_params: int,
    seed: int,
    *,
    conditional: bool = False,
    n_features: int = 0,
) -> ParamCircuit:
    """Seeded random circuit with exactly ``n_params`` trainable indices.

    With ``conditional=True`` the last qubit is an ancilla that is measured
    halfway through and drives one conditional rotation.
    """
    if n_qubits < 1 or (conditional and n_qubits < 2):
        raise CircuitError(f"not enough qubits ({n_qubits}) for this random circuit")
    rng = np.random.default_rng(seed)
    alloc = SlotAllocator()
    n_data = n_qubits - 1 if conditional else n_qubits
    reserve = 1 if conditional and n_params > 0 else 0
    budget = n_params - reserve

    nodes: list[CircuitNode] = [
        gate(GateKind.RY, f % n_qubits, params=[Embedded(f, 0.0, math.pi)]) for f in range(n_features)
    ]
    measured = not conditional

    def measure_now() -> None:
        nodes.append(gate(GateKind.RX, n_qubits - 1, params=[float(rng.uniform(0.0, math.pi))]))
        nodes.append(MidMeasure(n_qubits - 1, 0))
        target = int(rng.integers(n_data))
        param = alloc.take() if reserve else Fixed(float(rng.uniform(-math.pi, math.pi)))
        nodes.append(Conditional(0, RotationPool(), target, param))

    while alloc.next_index < (n_params if measured else budget):
        if not measured and alloc.next_index >= budget // 2:
            measure_now()
            measured = True
            continue
        left = (n_params if measured else budget) - alloc.next_index
        roll = rng.random()
        if roll < 0.15:
            nodes.append(gate(GateKind.H, int(rng.integers(n_qubits))))
            continue
        if roll < 0.3 and n_qubits >= 2:
            c, t = rng.choice(n_qubits, size=2, replace=False)
            nodes.append(gate(GateKind.CNOT, int(c), int(t)))
            continue
        options = [k for k in _SINGLE if k.arity <= left]
        if n_qubits >= 2:
            options += [k for k in _PAIRED if k.arity <= left]
        kind = options[int(rng.integers(len(options)))]
        qubits = [int(q) for q in rng.choice(n_qubits, size=kind.n_targets, replace=False)]
        if kind is GateKind.CYZ:
            nodes += [GateNode(op) for op in cyz(alloc.take(), alloc.take(), qubits[0], qubits[1])]
        else:
            nodes.append(gate(kind, *qubits, params=alloc.take_many(kind.arity)))
    if not measured:
        measure_now()

    return ParamCircuit(
        n_data_qubits=n_data,
        n_ancilla=n_qubits - n_data,
        nodes=tuple(nodes),
        n_trainable=alloc.next_index,
        n_features=n_features,
    )
