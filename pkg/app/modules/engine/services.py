"""Circuit execution over the analytic, sampled and noisy backends."""
from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from app.core.config import settings
from app.modules.circuit import (
    Barrier,
    Conditional,
    GateNode,
    MidMeasure,
    ParamCircuit,
    n_prediction_ancillas,
)
from app.modules.engine.schemas import AnalyticSV, NoiseSpec, NoisyDM, SampledSV
from app.modules.gates import (
    ROTATIONS,
    Embedded,
    Fixed,
    GateKind,
    ParamSlot,
    Trainable,
    block_derivative,
    decompose,
    target_block,
)
from app.modules.kernel import (
    DensityMatrix,
    State,
    apply_1q,
    apply_1q_dm,
    apply_controlled,
    apply_controlled_dm,
    bit_flip,
    default_shots,
    depolarize,
    expectation_z,
    marginal_one,
    new_zero_dm,
    new_zero_state,
    parity_signs,
    phase_flip,
    probabilities,
    project_qubit,
    sample_counts,
)

logger = logging.getLogger(__name__)


class EngineError(ValueError):
    """Raised when a circuit cannot be executed with the given inputs."""


# ---------------------------------------------------------------------------
# Observables and execution records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZString:
    """coeff * Z_q1 Z_q2 ...; a list of ZStrings is a sum (a Hamiltonian)."""

    qubits: tuple[int, ...]
    coeff: float = 1.0

    def __post_init__(self) -> None:
        qubits = tuple(int(q) for q in self.qubits)
        if not qubits:
            raise EngineError("a Z-string needs at least one qubit")
        if len(set(qubits)) != len(qubits):
            raise EngineError(f"duplicate qubits in Z-string {qubits}")
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "coeff", float(self.coeff))


def as_observables(observable: ZString | Sequence[ZString]) -> list[ZString]:
    obs = [observable] if isinstance(observable, ZString) else list(observable)
    if not obs:
        raise EngineError("at least one observable is required")
    return obs


@dataclass
class Instruction:
    """A resolved gate application, recorded for the adjoint sweep.

    ``rotation`` is set for conditional rotations: index into (RX, RY, RZ)
    per batch row, with ``kind`` left as None.
    """

    kind: GateKind | None
    qubits: tuple[int, ...]
    angles: tuple[Any, ...]
    uses: tuple[int | None, ...]
    block: np.ndarray
    rotation: np.ndarray | None = None

    @property
    def controlled(self) -> bool:
        return len(self.qubits) == 2

    def derivative(self, which: int) -> np.ndarray:
        if self.rotation is None:
            return block_derivative(self.kind, self.angles, which)
        per_kind = np.stack([block_derivative(k, self.angles, 0) for k in ROTATIONS])
        return per_kind[self.rotation, np.arange(len(self.rotation))]


@dataclass
class ExecutionContext:
    """Per-execution state: branch choices, slot shift and instrumentation.

    With ``freeze`` set, conditional nodes reuse ``branches`` from an earlier
    run instead of reading their register. ``shift`` adds an offset to one
    slot occurrence (index into ``ParamCircuit.slot_uses``).
    """

    branches: dict[int, np.ndarray] = field(default_factory=dict)
    freeze: bool = False
    shift: tuple[int, float] | None = None
    record: bool = False
    instructions: list[Instruction] = field(default_factory=list)
    gate_applications: int = 0
    state: State | None = None

    def frozen(self, shift: tuple[int, float] | None = None) -> ExecutionContext:
        return ExecutionContext(branches=dict(self.branches), freeze=True, shift=shift)


@dataclass
class RunResult:
    """Expectations (``(K,)`` or ``(B, K)``), register values and optional histogram."""

    expectations: np.ndarray
    registers: dict[int, Any]
    samples: dict[str, int] | None = None
    thresholds: dict[int, float] = field(default_factory=dict)
    shots: int | None = None

    @property
    def switch_on(self) -> dict[int, Any]:
        """Register value at or above the pool's upper threshold."""
        out: dict[int, Any] = {}
        for reg, value in self.registers.items():
            tau = self.thresholds.get(reg)
            if tau is None:
                tau = settings.TAU_HIGH
            on = np.asarray(value) >= tau
            out[reg] = bool(on) if on.ndim == 0 else on
        return out

    def to_json(self) -> str:
        def plain(value: Any) -> Any:
            return value.tolist() if isinstance(value, np.ndarray) else value

        doc = {
            "expectations": self.expectations.tolist(),
            "registers": {str(k): plain(v) for k, v in self.registers.items()},
            "samples": self.samples,
            "thresholds": {str(k): v for k, v in self.thresholds.items()},
            "shots": self.shots,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> RunResult:
        doc = json.loads(text)

        def arr(value: Any) -> Any:
            return np.asarray(value, dtype=np.float64) if isinstance(value, list) else float(value)

        return cls(
            expectations=np.asarray(doc["expectations"], dtype=np.float64),
            registers={int(k): arr(v) for k, v in doc["registers"].items()},
            samples=doc.get("samples"),
            thresholds={int(k): float(v) for k, v in doc.get("thresholds", {}).items()},
            shots=doc.get("shots"),
        )


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def apply_channel(rho: DensityMatrix, spec: NoiseSpec, q: int) -> DensityMatrix:
    """Depolarizing, then bit flip, then phase flip on qubit ``q``."""
    depolarize(rho, spec.p_depol, q)
    bit_flip(rho, spec.p_bitflip, q)
    phase_flip(rho, spec.p_phaseflip, q)
    return rho


def _resolve(slot: ParamSlot, theta: np.ndarray, feats: np.ndarray) -> Any:
    if isinstance(slot, Trainable):
        return float(theta[slot.index])
    if isinstance(slot, Embedded):
        return feats[:, slot.index]
    return float(slot.value)


def apply_block(state: State, qubits: tuple[int, ...], block: np.ndarray) -> None:
    if isinstance(state, DensityMatrix):
        if len(qubits) == 2:
            apply_controlled_dm(state, block, qubits[0], qubits[1], check=False)
        else:
            apply_1q_dm(state, block, qubits[0], check=False)
    elif len(qubits) == 2:
        apply_controlled(state, block, qubits[0], qubits[1], check=False)
    else:
        apply_1q(state, block, qubits[0], check=False)


def prepare_inputs(
    circuit: ParamCircuit, theta: Any, features: Any
) -> tuple[np.ndarray, np.ndarray, bool]:
    theta = np.asarray(theta if theta is not None else [], dtype=np.float64).reshape(-1)
    if theta.shape[0] != circuit.n_trainable:
        raise EngineError(f"theta has length {theta.shape[0]}, circuit expects {circuit.n_trainable}")
    if features is None:
        features = np.zeros(circuit.n_features)
    feats = np.asarray(features, dtype=np.float64)
    batched = feats.ndim == 2
    if feats.ndim == 1:
        feats = feats[None, :]
    if feats.ndim != 2 or feats.shape[1] != circuit.n_features:
        raise EngineError(f"features have shape {np.shape(features)}, circuit expects {circuit.n_features} per row")
    if feats.shape[0] < 1:
        raise EngineError("feature batch is empty")
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(feats))):
        raise EngineError("theta and features must be finite")
    return theta, feats, batched


def run(
    circuit: ParamCircuit,
    theta: Any,
    features: Any = None,
    backend: AnalyticSV | SampledSV | NoisyDM | None = None,
    observables: ZString | Sequence[ZString] | None = None,
    *,
    context: ExecutionContext | None = None,
) -> RunResult:
    """Execute ``circuit`` and measure the observables.

    ``features`` may be ``(n_features,)`` or a batch ``(B, n_features)``;
    embedded angles are used as given. Observables default to
    ``circuit.default_observables()``.
    """
    backend = backend if backend is not None else AnalyticSV()
    theta, feats, batched = prepare_inputs(circuit, theta, features)
    obs = as_observables(observables if observables is not None else circuit.default_observables())
    for o in obs:
        if max(o.qubits) >= circuit.n_qubits or min(o.qubits) < 0:
            raise EngineError(f"observable qubits {o.qubits} outside the {circuit.n_qubits}-qubit register")
    ctx = context if context is not None else ExecutionContext()
    n = circuit.n_qubits
    rows = feats.shape[0]

    noisy = isinstance(backend, NoisyDM)
    sampled = isinstance(backend, SampledSV)
    state: State = new_zero_dm(n, rows) if noisy else new_zero_state(n, rows)
    rng = np.random.default_rng(backend.seed) if sampled else None
    shots = (backend.shots or default_shots(n)) if sampled else None
    spec = backend.noise if noisy and not backend.noise.is_zero else None

    def shifted(value: Any, use: int) -> Any:
        if ctx.shift is not None and ctx.shift[0] == use:
            return value + ctx.shift[1]
        return value

    def after_gate(qubits: tuple[int, ...]) -> None:
        ctx.gate_applications += 1
        if spec is not None:
            for q in qubits:
                apply_channel(state, spec, q)

    registers: dict[int, np.ndarray] = {}
    thresholds: dict[int, float] = {}
    use = 0
    for pos, node in enumerate(circuit.nodes):
        if isinstance(node, GateNode):
            for prim in decompose(node.op):
                angles: list[Any] = []
                uses: list[int | None] = []
                for slot in prim.params:
                    value = _resolve(slot, theta, feats)
                    if isinstance(slot, Fixed):
                        uses.append(None)
                    else:
                        value = shifted(value, use)
                        uses.append(use)
                        use += 1
                    angles.append(value)
                block = target_block(prim.kind, angles)
                apply_block(state, prim.targets, block)
                after_gate(prim.targets)
                if ctx.record:
                    ctx.instructions.append(Instruction(prim.kind, prim.targets, tuple(angles), tuple(uses), block))
        elif isinstance(node, MidMeasure):
            p1 = np.atleast_1d(np.asarray(marginal_one(state, node.qubit), dtype=np.float64))
            if sampled:
                value = rng.binomial(shots, p1) / shots
                # Collapse onto the majority outcome; ties read 1.
                project_qubit(state, node.qubit, (value >= 0.5).astype(int))
            else:
                value = p1
            registers[node.register] = value
        elif isinstance(node, Conditional):
            if node.register not in registers:
                raise EngineError(f"node {pos}: register {node.register} read before any measurement wrote it")
            thresholds[node.register] = node.pool.tau_high
            if ctx.freeze:
                if pos not in ctx.branches:
                    raise EngineError(f"node {pos}: no frozen branch recorded")
                branch = ctx.branches[pos]
            else:
                branch = node.pool.branch(registers[node.register])
                ctx.branches[pos] = branch
            rotation = np.array([ROTATIONS.index(node.pool.rotation_for(int(b))) for b in np.atleast_1d(branch)])
            rotation = np.broadcast_to(rotation, (rows,)).copy()
            angle = _resolve(node.param, theta, feats)
            occ: int | None = None
            if not isinstance(node.param, Fixed):
                angle = shifted(angle, use)
                occ = use
                use += 1
            angle = np.broadcast_to(np.asarray(angle, dtype=np.float64), (rows,))
            per_kind = np.stack([target_block(k, [angle]) for k in ROTATIONS])
            block = per_kind[rotation, np.arange(rows)]
            apply_block(state, (node.target,), block)
            after_gate((node.target,))
            if ctx.record:
                ctx.instructions.append(Instruction(None, (node.target,), (angle,), (occ,), block, rotation))
        elif not isinstance(node, Barrier):
            raise EngineError(f"node {pos}: cannot execute {type(node).__name__}")

    samples: dict[str, int] | None = None
    if sampled:
        probs = probabilities(state).reshape(rows, -1)
        counts = np.stack([sample_counts(probs[r], shots, rng) for r in range(rows)])
        freq = counts / shots
        expectations = np.stack(
            [o.coeff * (freq @ parity_signs(n, tuple(sorted(o.qubits)))) for o in obs], axis=-1
        )
        if not batched:
            hits = np.flatnonzero(counts[0])
            samples = {format(int(i), f"0{n}b"): int(counts[0, i]) for i in hits}
    else:
        expectations = np.stack(
            [o.coeff * np.atleast_1d(expectation_z(state, o.qubits)) for o in obs], axis=-1
        )
    if not np.all(np.isfinite(expectations)):
        raise EngineError("non-finite expectation produced")
    if ctx.record:
        ctx.state = state

    if not batched:
        return RunResult(
            expectations=expectations[0],
            registers={k: float(v[0]) for k, v in registers.items()},
            samples=samples,
            thresholds=thresholds,
            shots=shots,
        )
    return RunResult(expectations, registers, samples, thresholds, shots)


# ---------------------------------------------------------------------------
# Read-out helpers
# ---------------------------------------------------------------------------


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def decode_prediction(
    result: RunResult,
    n_classes: int,
    head: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Class probabilities from a run whose first observables are the prediction ancillas.

    With ``head=(W, b)`` the logits are ``W @ expectations + b``. Without a head,
    class ``c`` scores the sum of the ancilla expectations signed by the bits of
    ``c`` (bit 0 -> +<Z>, bit 1 -> -<Z>).
    """
    exps = np.asarray(result.expectations, dtype=np.float64)
    m = n_prediction_ancillas(n_classes)
    if exps.shape[-1] < m:
        raise EngineError(f"{n_classes} classes need {m} prediction expectations, got {exps.shape[-1]}")
    if head is not None:
        weights, bias = (np.asarray(a, dtype=np.float64) for a in head)
        if weights.shape != (n_classes, exps.shape[-1]):
            raise EngineError(f"head weights shape {weights.shape} does not match ({n_classes}, {exps.shape[-1]})")
        return softmax(exps @ weights.T + bias)
    classes = np.arange(n_classes)
    signs = np.stack([1 - 2 * ((classes >> j) & 1) for j in range(m)], axis=-1).astype(np.float64)
    return softmax(exps[..., :m] @ signs.T)


def closed_form_z(channel: str, p: float) -> float:
    """<Z> after one channel on |0>."""
    if channel == "depolarizing":
        return 1.0 - p
    if channel == "bit_flip":
        return 1.0 - 2.0 * p
    if channel == "phase_flip":
        return 1.0
    raise EngineError(f"unknown channel {channel!r}")


def noise_sweep(channel: str, probabilities_: Sequence[float]) -> np.ndarray:
    """<Z> after preparing |0> and applying ``channel`` with each probability."""
    if channel not in ("depolarizing", "bit_flip", "phase_flip"):
        raise EngineError(f"unknown channel {channel!r}")
    out = []
    for p in probabilities_:
        spec = NoiseSpec(
            p_depol=p if channel == "depolarizing" else 0.0,
            p_bitflip=p if channel == "bit_flip" else 0.0,
            p_phaseflip=p if channel == "phase_flip" else 0.0,
        )
        rho = apply_channel(new_zero_dm(1), spec, 0)
        out.append(expectation_z(rho, (0,)))
    return np.asarray(out, dtype=np.float64)
