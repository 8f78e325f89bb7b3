"""Gradient engines: parameter shift, adjoint sweep and finite differences.

Every engine works per parameter *occurrence* (``ParamCircuit.slot_uses``)
and accumulates into the trainable or feature index the occurrence reads,
so circuits that reuse an index stay exact. Conditional branches are
decided by one unshifted forward pass and frozen for every shifted or
perturbed evaluation.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np

from app.core.config import settings
from app.modules.circuit import ParamCircuit, ring_pairs
from app.modules.engine import (
    AnalyticSV,
    ExecutionContext,
    NoisyDM,
    SampledSV,
    ZString,
    apply_block,
    as_observables,
    prepare_inputs,
    run,
)
from app.modules.gates import Embedded, GateKind, GateOp, Trainable, shift_rule
from app.modules.kernel import StateVector, apply_1q, parity_signs, project_qubit

logger = logging.getLogger(__name__)

AnyBackend = AnalyticSV | SampledSV | NoisyDM
Observable = ZString | Sequence[ZString]


class GradientError(ValueError):
    """Raised when a gradient cannot be computed for the given inputs."""


class DispatchError(GradientError):
    """Raised when a gradient method is used on a backend that cannot support it."""


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GradMethod:
    kind: Literal["param_shift", "adjoint", "finite_diff"]
    h: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("param_shift", "adjoint", "finite_diff"):
            raise GradientError(f"unknown gradient method {self.kind!r}")
        if self.kind == "finite_diff":
            if self.h is None or not self.h > 0.0:
                raise GradientError(f"finite-difference step must be > 0, got {self.h}")
        elif self.h is not None:
            raise GradientError(f"{self.kind} takes no step size")

    @classmethod
    def param_shift(cls) -> GradMethod:
        return cls("param_shift")

    @classmethod
    def adjoint(cls) -> GradMethod:
        return cls("adjoint")

    @classmethod
    def finite_diff(cls, h: float | None = None) -> GradMethod:
        return cls("finite_diff", settings.FD_STEP if h is None else h)


@dataclass(frozen=True)
class GradientVector:
    """d(cost)/d(theta) plus evaluation counters.

    ``feature_values`` holds d(cost)/d(feature) per batch row when requested:
    ``(n_features,)`` for an unbatched call, ``(B, n_features)`` otherwise.
    """

    values: np.ndarray
    method: GradMethod
    circuit_evals: int = 0
    gate_applications: int = 0
    derivative_applications: int = 0
    feature_values: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise GradientError("non-finite gradient entry")
        self.values.setflags(write=False)


@dataclass
class _Inputs:
    theta: np.ndarray
    feats: np.ndarray
    batched: bool
    obs: list[ZString]
    weights: np.ndarray  # (rows, K)

    @property
    def rows(self) -> int:
        return self.feats.shape[0]


def _inputs(
    circuit: ParamCircuit,
    theta: Any,
    features: Any,
    observable: Observable | None,
    weights: Any,
) -> _Inputs:
    theta, feats, batched = prepare_inputs(circuit, theta, features)
    obs = as_observables(observable if observable is not None else circuit.default_observables())
    rows, k = feats.shape[0], len(obs)
    if weights is None:
        w = np.ones((rows, k))
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim == 1:
            w = np.broadcast_to(w, (rows, w.shape[0]))
        if w.shape != (rows, k):
            raise GradientError(f"observable weights have shape {np.shape(weights)}, expected ({rows}, {k})")
    return _Inputs(theta, feats, batched, obs, np.ascontiguousarray(w))


def _cost_rows(expectations: np.ndarray, inp: _Inputs) -> np.ndarray:
    """Weighted sum of observables per batch row."""
    exps = np.reshape(expectations, (inp.rows, -1))
    return np.sum(exps * inp.weights, axis=1)


def _wanted(circuit: ParamCircuit, with_features: bool, only: set[int] | None) -> list[int]:
    """Occurrence indices an engine must differentiate."""
    out = []
    for u, use in enumerate(circuit.slot_uses):
        if isinstance(use.slot, Trainable):
            if only is None or use.slot.index in only:
                out.append(u)
        elif isinstance(use.slot, Embedded) and with_features:
            out.append(u)
    return out


class _Accumulator:
    def __init__(self, circuit: ParamCircuit, inp: _Inputs) -> None:
        self.circuit = circuit
        self.inp = inp
        self.values = np.zeros(circuit.n_trainable)
        self.features = np.zeros((inp.rows, circuit.n_features))

    def add(self, use: int, per_row: np.ndarray) -> None:
        slot = self.circuit.slot_uses[use].slot
        if isinstance(slot, Trainable):
            self.values[slot.index] += float(np.sum(per_row))
        else:
            self.features[:, slot.index] += per_row

    def feature_values(self, with_features: bool) -> np.ndarray | None:
        if not with_features:
            return None
        return self.features if self.inp.batched else self.features[0]


def _forward(
    circuit: ParamCircuit, inp: _Inputs, backend: AnyBackend, *, record: bool = False
) -> tuple[ExecutionContext, np.ndarray]:
    ctx = ExecutionContext(record=record)
    result = run(circuit, inp.theta, inp.feats, backend, inp.obs, context=ctx)
    return ctx, _cost_rows(result.expectations, inp)


# ---------------------------------------------------------------------------
# Engines
# ---------------------------------------------------------------------------


def grad_param_shift(
    circuit: ParamCircuit,
    theta: Any,
    features: Any = None,
    backend: AnyBackend | None = None,
    observable: Observable | None = None,
    *,
    weights: Any = None,
    with_features: bool = False,
    only: Sequence[int] | None = None,
) -> GradientVector:
    """Exact shift-rule gradient; two-term for rotations, four-term for CRY/CRZ.

    ``only`` restricts the work to the listed trainable indices (the others
    are left at zero).
    """
    backend = backend if backend is not None else AnalyticSV()
    inp = _inputs(circuit, theta, features, observable, weights)
    base, _ = _forward(circuit, inp, backend)
    acc = _Accumulator(circuit, inp)
    evals = 0
    applications = base.gate_applications

    for u in _wanted(circuit, with_features, set(only) if only is not None else None):
        rule = shift_rule(circuit.slot_uses[u].kind)
        per_row = np.zeros(inp.rows)
        for coeff, shift in rule:
            ctx = base.frozen(shift=(u, shift))
            result = run(circuit, inp.theta, inp.feats, backend, inp.obs, context=ctx)
            per_row += coeff * _cost_rows(result.expectations, inp)
            evals += 1
            applications += ctx.gate_applications
        acc.add(u, per_row)

    logger.debug("param-shift: %d shifted evaluations, %d gate applications", evals, applications)
    return GradientVector(
        values=acc.values,
        method=GradMethod.param_shift(),
        circuit_evals=evals,
        gate_applications=applications,
        feature_values=acc.feature_values(with_features),
    )


def _weighted_observable(state: StateVector, inp: _Inputs) -> StateVector:
    """lambda = sum_k w_k coeff_k Z_k |psi>, row-wise."""
    n = state.n_qubits
    amps = state.amplitudes.reshape(inp.rows, -1)
    lam = np.zeros_like(amps)
    for k, o in enumerate(inp.obs):
        signs = parity_signs(n, tuple(sorted(o.qubits)))
        lam += (inp.weights[:, k] * o.coeff)[:, None] * signs[None, :] * amps
    return StateVector(n, lam)


def grad_adjoint(
    circuit: ParamCircuit,
    theta: Any,
    features: Any = None,
    observable: Observable | None = None,
    *,
    backend: AnyBackend | None = None,
    weights: Any = None,
    with_features: bool = False,
) -> GradientVector:
    """One forward pass and one backward sweep, independent of the parameter count.

    Walking the recorded gates in reverse, both the state and the weighted
    observable state are un-applied; at each parameterised gate the
    derivative block on the current state gives 2 Re<lambda|dU psi>.
    """
    if backend is not None and not isinstance(backend, AnalyticSV):
        raise DispatchError(f"adjoint differentiation needs the analytic backend, got {backend.kind!r}")
    inp = _inputs(circuit, theta, features, observable, weights)
    ctx, _ = _forward(circuit, inp, AnalyticSV(), record=True)
    acc = _Accumulator(circuit, inp)
    wanted = set(_wanted(circuit, with_features, None))
    applications = ctx.gate_applications
    derivatives = 0

    if wanted:
        psi = ctx.state
        assert isinstance(psi, StateVector)
        lam = _weighted_observable(psi, inp)
        for ins in reversed(ctx.instructions):
            inverse = np.conj(np.swapaxes(ins.block, -1, -2))
            apply_block(psi, ins.qubits, inverse)
            applications += 1
            for which, use in enumerate(ins.uses):
                if use is None or use not in wanted:
                    continue
                mu = psi.copy()
                if ins.controlled:
                    project_qubit(mu, ins.qubits[0], 1, renormalize=False)
                apply_1q(mu, ins.derivative(which), ins.qubits[-1], check=False)
                derivatives += 1
                overlap = np.sum(np.conj(lam.amplitudes) * mu.amplitudes, axis=-1)
                acc.add(use, 2.0 * np.real(overlap))
            apply_block(lam, ins.qubits, inverse)
            applications += 1

    logger.debug("adjoint: %d gate applications, %d derivative blocks", applications, derivatives)
    return GradientVector(
        values=acc.values,
        method=GradMethod.adjoint(),
        circuit_evals=applications,
        gate_applications=applications,
        derivative_applications=derivatives,
        feature_values=acc.feature_values(with_features),
    )


def grad_finite_diff(
    circuit: ParamCircuit,
    theta: Any,
    features: Any = None,
    backend: AnyBackend | None = None,
    observable: Observable | None = None,
    *,
    h: float | None = None,
    weights: Any = None,
    with_features: bool = False,
) -> GradientVector:
    """Central differences under frozen branches; the test oracle."""
    method = GradMethod.finite_diff(h)
    step = float(method.h)  # type: ignore[arg-type]
    backend = backend if backend is not None else AnalyticSV()
    inp = _inputs(circuit, theta, features, observable, weights)
    base, _ = _forward(circuit, inp, backend)
    evals = 0
    applications = base.gate_applications

    def cost(theta_: np.ndarray, feats_: np.ndarray) -> np.ndarray:
        nonlocal evals, applications
        ctx = base.frozen()
        result = run(circuit, theta_, feats_, backend, inp.obs, context=ctx)
        evals += 1
        applications += ctx.gate_applications
        return _cost_rows(result.expectations, inp)

    values = np.zeros(circuit.n_trainable)
    for j in range(circuit.n_trainable):
        plus, minus = inp.theta.copy(), inp.theta.copy()
        plus[j] += step
        minus[j] -= step
        values[j] = float(np.sum(cost(plus, inp.feats) - cost(minus, inp.feats))) / (2.0 * step)

    feature_values = None
    if with_features:
        fvals = np.zeros((inp.rows, circuit.n_features))
        for f in range(circuit.n_features):
            plus, minus = inp.feats.copy(), inp.feats.copy()
            plus[:, f] += step
            minus[:, f] -= step
            fvals[:, f] = (cost(inp.theta, plus) - cost(inp.theta, minus)) / (2.0 * step)
        feature_values = fvals if inp.batched else fvals[0]

    return GradientVector(
        values=values,
        method=method,
        circuit_evals=evals,
        gate_applications=applications,
        feature_values=feature_values,
    )


def grad_dispatch(backend: AnyBackend) -> GradMethod:
    """Adjoint where the backend exposes exact amplitudes, parameter shift elsewhere."""
    if isinstance(backend, AnalyticSV):
        return GradMethod.adjoint()
    return GradMethod.param_shift()


def gradient(
    circuit: ParamCircuit,
    theta: Any,
    features: Any = None,
    backend: AnyBackend | None = None,
    observable: Observable | None = None,
    *,
    method: GradMethod | None = None,
    weights: Any = None,
    with_features: bool = False,
) -> GradientVector:
    """Dispatch to the engine named by ``method`` (default: ``grad_dispatch``)."""
    backend = backend if backend is not None else AnalyticSV()
    method = method if method is not None else grad_dispatch(backend)
    if method.kind == "adjoint":
        return grad_adjoint(
            circuit, theta, features, observable, backend=backend, weights=weights, with_features=with_features
        )
    if method.kind == "finite_diff":
        return grad_finite_diff(
            circuit, theta, features, backend, observable, h=method.h, weights=weights, with_features=with_features
        )
    return grad_param_shift(circuit, theta, features, backend, observable, weights=weights, with_features=with_features)


# ---------------------------------------------------------------------------
# Angle-adaptive growth
# ---------------------------------------------------------------------------

_CANDIDATE_KINDS = (GateKind.RY, GateKind.CRY, GateKind.CRZ)


@dataclass(frozen=True)
class Candidate:
    kind: GateKind
    qubits: tuple[int, ...]

    def __post_init__(self) -> None:
        kind = GateKind(self.kind)
        if kind not in _CANDIDATE_KINDS:
            raise GradientError(f"AAO candidates are RY, CRY or CRZ, got {kind.value}")
        qubits = tuple(int(q) for q in self.qubits)
        if len(qubits) != kind.n_targets:
            raise GradientError(f"{kind.value} candidate needs {kind.n_targets} qubits, got {qubits}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", qubits)

    def op(self, index: int) -> GateOp:
        return GateOp(self.kind, self.qubits, (Trainable(index),))

    def label(self) -> str:
        return f"{self.kind.value}({','.join(str(q) for q in self.qubits)})"


@dataclass(frozen=True)
class CandidatePool:
    candidates: tuple[Candidate, ...]

    def __post_init__(self) -> None:
        if not self.candidates:
            raise GradientError("candidate pool is empty")

    @classmethod
    def default(cls, qubits: Sequence[int]) -> CandidatePool:
        """RY on each qubit, then CRY and CRZ around the ring."""
        qubits = list(qubits)
        pool = [Candidate(GateKind.RY, (q,)) for q in qubits]
        if len(qubits) < 2:
            return cls(tuple(pool))
        for i, j in ring_pairs(len(qubits)):
            pool.append(Candidate(GateKind.CRY, (qubits[i], qubits[j])))
            pool.append(Candidate(GateKind.CRZ, (qubits[i], qubits[j])))
        return cls(tuple(pool))


def extend(circuit: ParamCircuit, theta: Any, candidate: Candidate) -> tuple[ParamCircuit, np.ndarray]:
    """Append ``candidate`` with a fresh trainable slot initialised to 0."""
    if max(candidate.qubits) >= circuit.n_qubits:
        raise GradientError(f"candidate {candidate.label()} outside the {circuit.n_qubits}-qubit register")
    index = circuit.n_trainable
    grown = circuit.with_gate(candidate.op(index))
    new_theta = np.append(np.asarray(theta, dtype=np.float64).reshape(-1), 0.0)
    return grown, new_theta


def aao_scores(
    circuit: ParamCircuit,
    theta: Any,
    features: Any,
    backend: AnyBackend | None,
    observable: Observable | None,
    pool: CandidatePool,
    *,
    weights: Any = None,
) -> np.ndarray:
    """|d cost / d phi| at phi = 0 for each candidate, by parameter shift."""
    scores = np.zeros(len(pool.candidates))
    for i, candidate in enumerate(pool.candidates):
        grown, new_theta = extend(circuit, theta, candidate)
        grad = grad_param_shift(
            grown, new_theta, features, backend, observable, weights=weights, only=[grown.n_trainable - 1]
        )
        scores[i] = abs(grad.values[-1])
    return scores


def aao_step(
    circuit: ParamCircuit,
    theta: Any,
    features: Any,
    backend: AnyBackend | None,
    observable: Observable | None,
    pool: CandidatePool,
    *,
    weights: Any = None,
) -> tuple[ParamCircuit, np.ndarray]:
    """Append the candidate with the largest gradient magnitude (lowest index on ties)."""
    scores = aao_scores(circuit, theta, features, backend, observable, pool, weights=weights)
    best = int(np.argmax(scores))
    chosen = pool.candidates[best]
    logger.info("AAO: appended %s (|grad|=%.6g)", chosen.label(), scores[best])
    return extend(circuit, theta, chosen)


def max_deviation(columns: Sequence[np.ndarray]) -> np.ndarray:
    """Largest pairwise absolute difference across gradient columns, per entry."""
    stack = np.stack([np.asarray(c, dtype=np.float64) for c in columns])
    if stack.shape[0] < 2:
        return np.zeros(stack.shape[1:])
    return np.max(stack, axis=0) - np.min(stack, axis=0)


def shot_sigma(expectation: float, shots: int) -> float:
    """Standard deviation of a +-1 observable estimated from ``shots`` draws."""
    return math.sqrt(max(1.0 - expectation * expectation, 0.0) / shots)
