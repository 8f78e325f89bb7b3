"""JSON-lines circuit documents.

The first record carries the circuit header; every following record is one
node. Angles are written with ``repr`` precision so a round trip is lossless.
"""
from __future__ import annotations

import json
from typing import Any

from app.modules.circuit.ir import (
    Barrier,
    CircuitError,
    CircuitNode,
    Conditional,
    GateNode,
    MidMeasure,
    ParamCircuit,
    RotationPool,
)
from app.modules.gates import Embedded, Fixed, GateKind, GateOp, ParamSlot, Trainable

FORMAT = "qpie-circuit/1"


def _slot_record(slot: ParamSlot) -> dict[str, Any]:
    if isinstance(slot, Trainable):
        return {"slot": "trainable", "index": slot.index}
    if isinstance(slot, Embedded):
        return {"slot": "embedded", "index": slot.index, "lo": slot.lo, "hi": slot.hi}
    return {"slot": "fixed", "value": slot.value}


def _slot_from(record: dict[str, Any]) -> ParamSlot:
    kind = record.get("slot")
    if kind == "trainable":
        return Trainable(int(record["index"]))
    if kind == "embedded":
        return Embedded(int(record["index"]), float(record["lo"]), float(record["hi"]))
    if kind == "fixed":
        return Fixed(float(record["value"]))
    raise CircuitError(f"unknown parameter slot {kind!r}")


def _node_record(node: CircuitNode) -> dict[str, Any]:
    if isinstance(node, GateNode):
        return {
            "node": "gate",
            "kind": node.op.kind.value,
            "qubits": list(node.op.targets),
            "params": [_slot_record(s) for s in node.op.params],
        }
    if isinstance(node, MidMeasure):
        return {"node": "measure", "qubit": node.qubit, "register": node.register}
    if isinstance(node, Conditional):
        return {
            "node": "conditional",
            "register": node.register,
            "target": node.target,
            "param": _slot_record(node.param),
            "one_hot": [list(row) for row in node.pool.one_hot],
            "tau_low": node.pool.tau_low,
            "tau_high": node.pool.tau_high,
        }
    return {"node": "barrier"}


def _node_from(record: dict[str, Any]) -> CircuitNode:
    kind = record.get("node")
    if kind == "gate":
        op = GateOp(
            GateKind(record["kind"]),
            tuple(record["qubits"]),
            tuple(_slot_from(s) for s in record.get("params", [])),
        )
        return GateNode(op)
    if kind == "measure":
        return MidMeasure(int(record["qubit"]), int(record["register"]))
    if kind == "conditional":
        pool = RotationPool(
            tuple(tuple(row) for row in record["one_hot"]),
            float(record["tau_low"]),
            float(record["tau_high"]),
        )
        return Conditional(int(record["register"]), pool, int(record["target"]), _slot_from(record["param"]))
    if kind == "barrier":
        return Barrier()
    raise CircuitError(f"unknown node kind {kind!r}")


def circuit_records(circuit: ParamCircuit) -> list[dict[str, Any]]:
    header = {
        "format": FORMAT,
        "n_data_qubits": circuit.n_data_qubits,
        "n_ancilla": circuit.n_ancilla,
        "n_readout": circuit.n_readout,
        "n_trainable": circuit.n_trainable,
        "n_features": circuit.n_features,
    }
    return [header] + [_node_record(node) for node in circuit.nodes]


def circuit_from_records(records: list[dict[str, Any]]) -> ParamCircuit:
    if not records or records[0].get("format") != FORMAT:
        raise CircuitError(f"not a {FORMAT} document")
    header = records[0]
    return ParamCircuit(
        n_data_qubits=int(header["n_data_qubits"]),
        n_ancilla=int(header["n_ancilla"]),
        nodes=tuple(_node_from(r) for r in records[1:]),
        n_trainable=int(header["n_trainable"]),
        n_features=int(header["n_features"]),
        n_readout=int(header.get("n_readout", 0)),
    )


def dumps_circuit(circuit: ParamCircuit) -> str:
    return "\n".join(json.dumps(r, sort_keys=True) for r in circuit_records(circuit)) + "\n"


def loads_circuit(text: str) -> ParamCircuit:
    try:
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
    except json.JSONDecodeError as exc:
        raise CircuitError(f"malformed circuit document: {exc}") from exc
    return circuit_from_records(records)
