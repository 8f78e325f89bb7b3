"""Quantum state kernels: statevector and density-matrix representations."""
from app.modules.kernel.state import (
    DensityMatrix,
    KernelError,
    State,
    StateVector,
    apply_1q,
    apply_1q_dm,
    apply_controlled,
    apply_controlled_dm,
    bit_flip,
    check_unitary,
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
    sample_bitstrings,
    sample_counts,
    to_density,
)

__all__ = [
    "DensityMatrix",
    "KernelError",
    "State",
    "StateVector",
    "apply_1q",
    "apply_1q_dm",
    "apply_controlled",
    "apply_controlled_dm",
    "bit_flip",
    "check_unitary",
    "default_shots",
    "depolarize",
    "expectation_z",
    "marginal_one",
    "new_zero_dm",
    "new_zero_state",
    "parity_signs",
    "phase_flip",
    "probabilities",
    "project_qubit",
    "sample_bitstrings",
    "sample_counts",
    "to_density",
]
