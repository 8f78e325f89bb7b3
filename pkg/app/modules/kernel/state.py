"""Pure and mixed state representations with in-place gate kernels.

Conventions
-----------
* Qubit 0 is the least significant bit of the basis-state index. After the
  flat amplitude row is reshaped to ``(2,) * n`` the axis holding qubit ``q``
  is ``n - 1 - q``.
* Every state may carry a leading batch axis (one amplitude row per sample).
  Internally the kernels always see a ``(B, 2, ..., 2)`` view, so qubit ``q``
  lives on tensor axis ``n - q``. For a density matrix the row index of
  qubit ``q`` is axis ``n - q`` and the column index is axis ``2n - q``.
* Amplitudes are ``complex128`` (interleaved re/im pairs in memory) and gates
  are applied in place over index strides; the ``apply_*`` functions return
  the same object they were given.
"""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from app.core.config import settings

logger = logging.getLogger(__name__)


class KernelError(ValueError):
    """Raised when a state operation gets arguments it cannot honour."""


# ---------------------------------------------------------------------------
# State types
# ---------------------------------------------------------------------------


@dataclass
class StateVector:
    """Pure state. ``amplitudes`` has shape ``(2**n,)`` or ``(B, 2**n)``."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)

    @property
    def batched(self) -> bool:
        return self.amplitudes.ndim == 2

    @property
    def batch_size(self) -> int:
        return self.amplitudes.shape[0] if self.batched else 1

    def copy(self) -> StateVector:
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> np.ndarray | float:
        norms = np.sqrt(np.sum(np.abs(self.amplitudes) ** 2, axis=-1))
        return norms if self.batched else float(norms)

    def tensor(self) -> np.ndarray:
        """Writable ``(B, 2, ..., 2)`` view of the amplitudes."""
        return self.amplitudes.reshape((self.batch_size,) + (2,) * self.n_qubits)


@dataclass
class DensityMatrix:
    """Mixed state. ``entries`` has shape ``(2**n, 2**n)`` or ``(B, 2**n, 2**n)``."""

    n_qubits: int
    entries: np.ndarray

    def __post_init__(self) -> None:
        self.entries = np.ascontiguousarray(self.entries, dtype=np.complex128)

    @property
    def batched(self) -> bool:
        return self.entries.ndim == 3

    @property
    def batch_size(self) -> int:
        return self.entries.shape[0] if self.batched else 1

    def copy(self) -> DensityMatrix:
        return DensityMatrix(self.n_qubits, self.entries.copy())

    def trace(self) -> np.ndarray | float:
        tr = np.real(np.trace(self.entries, axis1=-2, axis2=-1))
        return tr if self.batched else float(tr)

    def tensor(self) -> np.ndarray:
        return self.entries.reshape((self.batch_size,) + (2,) * (2 * self.n_qubits))


State = StateVector | DensityMatrix


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def new_zero_state(n: int, batch: int | None = None) -> StateVector:
    """|0...0> on ``n`` qubits, optionally repeated ``batch`` times."""
    if not 1 <= n <= settings.MAX_QUBITS:
        raise KernelError(f"n_qubits must be in [1, {settings.MAX_QUBITS}], got {n}")
    if batch is None:
        amps = np.zeros(1 << n, dtype=np.complex128)
        amps[0] = 1.0
    else:
        if batch < 1:
            raise KernelError(f"batch must be >= 1, got {batch}")
        amps = np.zeros((batch, 1 << n), dtype=np.complex128)
        amps[:, 0] = 1.0
    return StateVector(n, amps)


def new_zero_dm(n: int, batch: int | None = None) -> DensityMatrix:
    """|0...0><0...0| on ``n`` qubits."""
    if not 1 <= n <= settings.MAX_DM_QUBITS:
        raise KernelError(f"density-matrix n_qubits must be in [1, {settings.MAX_DM_QUBITS}], got {n}")
    dim = 1 << n
    if batch is None:
        entries = np.zeros((dim, dim), dtype=np.complex128)
        entries[0, 0] = 1.0
    else:
        if batch < 1:
            raise KernelError(f"batch must be >= 1, got {batch}")
        entries = np.zeros((batch, dim, dim), dtype=np.complex128)
        entries[:, 0, 0] = 1.0
    return DensityMatrix(n, entries)


def to_density(state: StateVector) -> DensityMatrix:
    """|psi><psi| for every row of ``state``."""
    amps = state.amplitudes
    entries = amps[..., :, None] * np.conj(amps[..., None, :])
    return DensityMatrix(state.n_qubits, entries)


def default_shots(n_qubits: int) -> int:
    """Shot count that covers every outcome: 2**n."""
    return 1 << n_qubits


# ---------------------------------------------------------------------------
# Validation helpers
# ---------------------------------------------------------------------------


def check_unitary(u: np.ndarray, tol: float | None = None) -> None:
    """Raise KernelError unless ``||U^dagger U - I||_inf < tol`` (per batch row)."""
    tol = settings.UNITARY_TOL if tol is None else tol
    u = np.asarray(u)
    if u.shape[-2:] != (2, 2):
        raise KernelError(f"expected 2x2 gate block, got shape {u.shape}")
    prod = np.conj(np.swapaxes(u, -1, -2)) @ u
    dev = np.max(np.abs(prod - np.eye(2)))
    if not np.isfinite(dev) or dev >= tol:
        raise KernelError(f"gate is not unitary (deviation {dev:.3e})")


def _check_qubit(n: int, q: int) -> None:
    if not 0 <= q < n:
        raise KernelError(f"qubit {q} out of range for {n}-qubit state")


def _check_block(u: np.ndarray, batch: int) -> np.ndarray:
    u = np.asarray(u, dtype=np.complex128)
    if u.shape == (2, 2):
        return u
    if u.ndim == 3 and u.shape[1:] == (2, 2) and u.shape[0] in (1, batch):
        return u
    raise KernelError(f"gate block shape {u.shape} does not fit batch of {batch}")


def _index(ndim: int, fixed: dict[int, int]) -> tuple:
    idx: list = [slice(None)] * ndim
    for axis, value in fixed.items():
        idx[axis] = value
    return tuple(idx)


def _coeff(u: np.ndarray, i: int, j: int, ndim: int) -> np.ndarray | complex:
    """Entry (i, j) of ``u`` shaped to broadcast against a ``ndim`` slice."""
    if u.ndim == 2:
        return u[i, j]
    return u[:, i, j].reshape((-1,) + (1,) * (ndim - 1))


def _mix(t: np.ndarray, u: np.ndarray, axis: int) -> None:
    """In place: apply the 2x2 block ``u`` along ``axis`` of the tensor view ``t``."""
    i0 = _index(t.ndim, {axis: 0})
    i1 = _index(t.ndim, {axis: 1})
    a0 = t[i0].copy()
    a1 = t[i1].copy()
    nd = a0.ndim
    t[i0] = _coeff(u, 0, 0, nd) * a0 + _coeff(u, 0, 1, nd) * a1
    t[i1] = _coeff(u, 1, 0, nd) * a0 + _coeff(u, 1, 1, nd) * a1


def _control_view(t: np.ndarray, control_axis: int, target_axis: int) -> tuple[np.ndarray, int]:
    view = t[_index(t.ndim, {control_axis: 1})]
    return view, target_axis - 1 if target_axis > control_axis else target_axis


# ---------------------------------------------------------------------------
# Pure-state kernels
# ---------------------------------------------------------------------------


def apply_1q(state: StateVector, u: np.ndarray, q: int, *, check: bool = True) -> StateVector:
    """Apply the 2x2 block ``u`` (or one block per batch row) to qubit ``q``."""
    _check_qubit(state.n_qubits, q)
    u = _check_block(u, state.batch_size)
    if check:
        check_unitary(u)
    _mix(state.tensor(), u, state.n_qubits - q)
    return state


def apply_controlled(
    state: StateVector, u: np.ndarray, control: int, target: int, *, check: bool = True
) -> StateVector:
    """Apply ``u`` to ``target`` on the amplitudes whose ``control`` bit is 1."""
    if control == target:
        raise KernelError("control and target must differ")
    _check_qubit(state.n_qubits, control)
    _check_qubit(state.n_qubits, target)
    u = _check_block(u, state.batch_size)
    if check:
        check_unitary(u)
    n = state.n_qubits
    view, axis = _control_view(state.tensor(), n - control, n - target)
    _mix(view, u, axis)
    return state


def project_qubit(
    state: StateVector, q: int, outcome: int | np.ndarray, *, renormalize: bool = True
) -> StateVector:
    """Zero the amplitudes where qubit ``q`` differs from ``outcome``.

    ``outcome`` may be one value per batch row. Renormalisation fails on a row
    whose kept branch has zero weight.
    """
    _check_qubit(state.n_qubits, q)
    t = state.tensor()
    axis = state.n_qubits - q
    outcomes = np.broadcast_to(np.asarray(outcome, dtype=int), (state.batch_size,))
    if np.any((outcomes != 0) & (outcomes != 1)):
        raise KernelError("measurement outcome must be 0 or 1")
    for drop in (0, 1):
        rows = outcomes == 1 - drop
        if np.any(rows):
            sub = t[rows]
            sub[_index(sub.ndim, {axis: drop})] = 0.0
            t[rows] = sub
    if renormalize:
        flat = state.amplitudes.reshape(state.batch_size, -1)
        norms = np.sqrt(np.sum(np.abs(flat) ** 2, axis=1))
        if np.any(norms < 1e-15):
            raise KernelError(f"projection of qubit {q} onto outcome with zero probability")
        flat /= norms[:, None]
    return state


# ---------------------------------------------------------------------------
# Mixed-state kernels
# ---------------------------------------------------------------------------


def apply_1q_dm(rho: DensityMatrix, u: np.ndarray, q: int, *, check: bool = True) -> DensityMatrix:
    """rho -> U rho U^dagger with ``u`` acting on qubit ``q``."""
    _check_qubit(rho.n_qubits, q)
    u = _check_block(u, rho.batch_size)
    if check:
        check_unitary(u)
    n = rho.n_qubits
    t = rho.tensor()
    _mix(t, u, n - q)
    _mix(t, np.conj(u), 2 * n - q)
    return rho


def apply_controlled_dm(
    rho: DensityMatrix, u: np.ndarray, control: int, target: int, *, check: bool = True
) -> DensityMatrix:
    if control == target:
        raise KernelError("control and target must differ")
    _check_qubit(rho.n_qubits, control)
    _check_qubit(rho.n_qubits, target)
    u = _check_block(u, rho.batch_size)
    if check:
        check_unitary(u)
    n = rho.n_qubits
    t = rho.tensor()
    rows, axis = _control_view(t, n - control, n - target)
    _mix(rows, u, axis)
    cols, axis = _control_view(t, 2 * n - control, 2 * n - target)
    _mix(cols, np.conj(u), axis)
    return rho


def depolarize(rho: DensityMatrix, p: float, q: int) -> DensityMatrix:
    """rho -> (1 - p) rho + p (I/2 (x) Tr_q rho)."""
    _check_qubit(rho.n_qubits, q)
    if p == 0.0:
        return rho
    n = rho.n_qubits
    t = rho.tensor()
    r, c = n - q, 2 * n - q
    i00 = _index(t.ndim, {r: 0, c: 0})
    i11 = _index(t.ndim, {r: 1, c: 1})
    reduced = 0.5 * (t[i00] + t[i11])
    t *= 1.0 - p
    t[i00] += p * reduced
    t[i11] += p * reduced
    return rho


def bit_flip(rho: DensityMatrix, p: float, q: int) -> DensityMatrix:
    """rho -> (1 - p) rho + p X rho X."""
    _check_qubit(rho.n_qubits, q)
    if p == 0.0:
        return rho
    n = rho.n_qubits
    t = rho.tensor()
    flipped = np.flip(t, axis=(n - q, 2 * n - q)).copy()
    t *= 1.0 - p
    t += p * flipped
    return rho


def phase_flip(rho: DensityMatrix, p: float, q: int) -> DensityMatrix:
    """rho -> (1 - p) rho + p Z rho Z; only the off-diagonal blocks change."""
    _check_qubit(rho.n_qubits, q)
    if p == 0.0:
        return rho
    n = rho.n_qubits
    t = rho.tensor()
    r, c = n - q, 2 * n - q
    t[_index(t.ndim, {r: 0, c: 1})] *= 1.0 - 2.0 * p
    t[_index(t.ndim, {r: 1, c: 0})] *= 1.0 - 2.0 * p
    return rho


# ---------------------------------------------------------------------------
# Read-out
# ---------------------------------------------------------------------------


@lru_cache(maxsize=256)
def parity_signs(n: int, qubits: tuple[int, ...]) -> np.ndarray:
    """(-1)**(parity of the listed bits) for every basis index."""
    basis = np.arange(1 << n)
    parity = np.zeros(1 << n, dtype=np.int64)
    for q in qubits:
        parity ^= (basis >> q) & 1
    signs = (1 - 2 * parity).astype(np.float64)
    signs.flags.writeable = False
    return signs


def probabilities(state: State) -> np.ndarray:
    """Born probabilities per basis index, shape ``(2**n,)`` or ``(B, 2**n)``."""
    if isinstance(state, DensityMatrix):
        return np.real(np.diagonal(state.entries, axis1=-2, axis2=-1)).copy()
    return np.abs(state.amplitudes) ** 2


def marginal_one(state: State, q: int) -> np.ndarray | float:
    """Probability that qubit ``q`` reads 1."""
    _check_qubit(state.n_qubits, q)
    probs = probabilities(state)
    mask = ((np.arange(1 << state.n_qubits) >> q) & 1).astype(bool)
    p1 = np.clip(np.sum(probs[..., mask], axis=-1), 0.0, 1.0)
    return p1 if state.batched else float(p1)


def expectation_z(state: State, qubits: Sequence[int]) -> np.ndarray | float:
    """<Z_q1 Z_q2 ...> over the listed qubits."""
    qubits = tuple(int(q) for q in qubits)
    if not qubits:
        raise KernelError("expectation_z needs at least one qubit")
    if len(set(qubits)) != len(qubits):
        raise KernelError(f"duplicate qubit indices in {qubits}")
    for q in qubits:
        _check_qubit(state.n_qubits, q)
    signs = parity_signs(state.n_qubits, tuple(sorted(qubits)))
    value = np.clip(probabilities(state) @ signs, -1.0, 1.0)
    return value if state.batched else float(value)


def sample_counts(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial outcome counts for one probability row."""
    if shots < 1:
        raise KernelError(f"shots must be >= 1, got {shots}")
    p = np.clip(np.asarray(probs, dtype=np.float64), 0.0, None)
    p /= p.sum()
    return rng.multinomial(shots, p)


def sample_bitstrings(
    state: StateVector, shots: int, rng_seed: int | np.random.Generator
) -> dict[str, int]:
    """Histogram of measured bitstrings (qubit n-1 printed first)."""
    if state.batched:
        raise KernelError("sample_bitstrings takes a single (unbatched) state")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    counts = sample_counts(probabilities(state), shots, rng)
    hits = np.flatnonzero(counts)
    return {format(int(i), f"0{state.n_qubits}b"): int(counts[i]) for i in hits}
