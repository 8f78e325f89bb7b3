"""Variational energy minimisation over weighted Z-string Hamiltonians."""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import torch
from scipy import linalg

from app.modules.circuit import ParamCircuit
from app.modules.engine import ZString, as_observables, run
from app.modules.grad import gradient
from app.modules.hybrid.model import DTYPE, THETA_INIT, TrainingError
from app.modules.hybrid.schemas import VqeConfig
from app.modules.kernel import parity_signs

logger = logging.getLogger(__name__)

# Dense diagonalisation is the oracle; 2**12 x 2**12 is the largest we build.
MAX_ORACLE_QUBITS = 12


@dataclass(frozen=True)
class VqeResult:
    theta: np.ndarray
    energies: list[float]
    converged: bool
    ground_energy: float | None = None

    @property
    def energy(self) -> float:
        """Energy at ``theta``: the final iterate when converged, else the best seen."""
        return self.energies[-1] if self.converged else self.best_energy

    @property
    def best_energy(self) -> float:
        return min(self.energies)


def hamiltonian_from_config(config: VqeConfig) -> list[ZString]:
    return [ZString(tuple(term.qubits), term.coeff) for term in config.hamiltonian]


def hamiltonian_matrix(hamiltonian: Sequence[ZString], n_qubits: int) -> np.ndarray:
    """Dense matrix of a Z-string sum in the computational basis."""
    if not 1 <= n_qubits <= MAX_ORACLE_QUBITS:
        raise TrainingError(f"dense Hamiltonian limited to {MAX_ORACLE_QUBITS} qubits, got {n_qubits}")
    diagonal = np.zeros(1 << n_qubits)
    for term in as_observables(list(hamiltonian)):
        if max(term.qubits) >= n_qubits:
            raise TrainingError(f"term {term.qubits} outside the {n_qubits}-qubit register")
        diagonal += term.coeff * parity_signs(n_qubits, tuple(sorted(term.qubits)))
    return np.diag(diagonal)


def ground_energy(hamiltonian: Sequence[ZString], n_qubits: int) -> float:
    """Smallest eigenvalue by full diagonalisation."""
    return float(linalg.eigh(hamiltonian_matrix(hamiltonian, n_qubits), eigvals_only=True)[0])


def vqe_minimize(
    circuit: ParamCircuit,
    hamiltonian: Sequence[ZString],
    config: VqeConfig | None = None,
    theta0: np.ndarray | None = None,
) -> VqeResult:
    """Gradient descent on <H> until the energy stalls for ``patience`` iterations.

    Stops after ``max_iter`` updates otherwise and returns the lowest-energy
    point seen, with ``converged=False``.
    """
    config = config if config is not None else VqeConfig(n_qubits=circuit.n_qubits)
    observables = as_observables(list(hamiltonian))
    if theta0 is None:
        theta0 = np.random.default_rng(config.seed).uniform(-THETA_INIT, THETA_INIT, circuit.n_trainable)
    theta = torch.nn.Parameter(torch.as_tensor(np.asarray(theta0, dtype=np.float64), dtype=DTYPE))
    if config.optimizer == "adam":
        optimizer: torch.optim.Optimizer = torch.optim.Adam([theta], lr=config.lr)
    else:
        optimizer = torch.optim.SGD([theta], lr=config.lr)

    def energy() -> float:
        result = run(circuit, theta.detach().numpy(), None, config.backend, observables)
        return float(np.sum(result.expectations))

    energies = [energy()]
    best_theta, best_energy = theta.detach().numpy().copy(), energies[0]
    stalled = 0
    converged = False
    for iteration in range(config.max_iter):
        grad = gradient(circuit, theta.detach().numpy(), None, config.backend, observables)
        optimizer.zero_grad()
        theta.grad = torch.as_tensor(np.array(grad.values), dtype=DTYPE)
        optimizer.step()
        energies.append(energy())
        if energies[-1] < best_energy:
            best_theta, best_energy = theta.detach().numpy().copy(), energies[-1]
        stalled = stalled + 1 if abs(energies[-1] - energies[-2]) < config.threshold else 0
        if stalled >= config.patience:
            converged = True
            logger.info("VQE converged after %d iterations: E=%.10g", iteration + 1, energies[-1])
            break
    final = theta.detach().numpy().copy()
    if not converged:
        if config.max_iter:
            logger.warning("VQE did not converge in %d iterations (best E=%.10g)", config.max_iter, best_energy)
        final = best_theta

    oracle = ground_energy(observables, circuit.n_qubits) if circuit.n_qubits <= MAX_ORACLE_QUBITS else None
    return VqeResult(final, energies, converged, oracle)
