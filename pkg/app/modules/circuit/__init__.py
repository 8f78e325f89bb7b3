"""Circuit IR, QPIE builders and circuit documents."""
from app.modules.circuit.builders import (
    build_ppel,
    build_qpie_vqc,
    build_random_circuit,
    build_ry_product,
    build_sel,
    n_prediction_ancillas,
    ring_pairs,
)
from app.modules.circuit.ir import (
    Barrier,
    CircuitError,
    CircuitNode,
    Conditional,
    GateNode,
    MeasRegister,
    MidMeasure,
    ParamCircuit,
    RotationPool,
    SlotAllocator,
    SlotUse,
    evaluate_conditional,
    gate,
)
from app.modules.circuit.serialize import (
    circuit_from_records,
    circuit_records,
    dumps_circuit,
    loads_circuit,
)

__all__ = [
    "Barrier",
    "CircuitError",
    "CircuitNode",
    "Conditional",
    "GateNode",
    "MeasRegister",
    "MidMeasure",
    "ParamCircuit",
    "RotationPool",
    "SlotAllocator",
    "SlotUse",
    "build_ppel",
    "build_qpie_vqc",
    "build_random_circuit",
    "build_ry_product",
    "build_sel",
    "circuit_from_records",
    "circuit_records",
    "dumps_circuit",
    "evaluate_conditional",
    "gate",
    "loads_circuit",
    "n_prediction_ancillas",
    "ring_pairs",
]
