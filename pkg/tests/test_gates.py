"""Tests for gate matrices, analytic derivatives and shift rules."""
from __future__ import annotations

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.modules.gates import (
    FOUR_TERM,
    TWO_TERM,
    Embedded,
    Fixed,
    GateError,
    GateKind,
    GateOp,
    Trainable,
    block_derivative,
    cyz,
    decompose,
    matrix_of,
    param_derivative,
    shift_rule,
    target_block,
)

PARAMETERISED = [GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.R3, GateKind.CRY, GateKind.CRZ, GateKind.CYZ]


def _unitarity_deviation(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def _fd(kind: GateKind, params: list[float], which: int, h: float = 1e-6) -> np.ndarray:
    plus, minus = list(params), list(params)
    plus[which] += h
    minus[which] -= h
    return (matrix_of(kind, plus) - matrix_of(kind, minus)) / (2 * h)


# ---------------------------------------------------------------------------
# matrices
# ---------------------------------------------------------------------------

class TestMatrices:
    @pytest.mark.parametrize("kind", PARAMETERISED)
    def test_unitary_over_random_draws(self, kind):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            params = list(rng.uniform(-2 * math.pi, 2 * math.pi, kind.arity))
            assert _unitarity_deviation(matrix_of(kind, params)) < 1e-12

    def test_r3_reduces_to_ry(self):
        for theta in np.linspace(-math.pi, math.pi, 17):
            assert_allclose(matrix_of("R3", [theta, 0.0, 0.0]), matrix_of("RY", [theta]), atol=1e-12)

    def test_r3_entries(self):
        theta, phi, lam = 0.7, -1.1, 2.3
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        expected = np.array(
            [[c, -np.exp(1j * lam) * s], [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]]
        )
        assert_allclose(matrix_of("R3", [theta, phi, lam]), expected, atol=1e-12)

    def test_hadamard_squares_to_identity(self):
        h = matrix_of("H")
        assert_allclose(h @ h, np.eye(2), atol=1e-12)

    @pytest.mark.parametrize("theta", [0.0, math.pi / 2, 1.2, math.pi])
    def test_ry_on_zero(self, theta):
        amps = matrix_of("RY", [theta]) @ np.array([1.0, 0.0])
        assert abs(amps[0]) ** 2 - abs(amps[1]) ** 2 == pytest.approx(math.cos(theta), abs=1e-12)

    def test_controlled_layout(self):
        full = matrix_of("CRY", [0.4])
        assert_allclose(full[:2, :2], np.eye(2))
        assert_allclose(full[2:, 2:], target_block("RY", [0.4]))
        assert_allclose(full[:2, 2:], 0)

    def test_cyz_is_crz_after_cry(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            ty, tz = rng.uniform(-math.pi, math.pi, 2)
            composite = matrix_of("CYZ", [ty, tz])
            assert_allclose(composite, matrix_of("CRZ", [tz]) @ matrix_of("CRY", [ty]), atol=1e-12)
            amps = rng.normal(size=4) + 1j * rng.normal(size=4)
            assert_allclose(
                composite @ amps,
                matrix_of("CRZ", [tz]) @ (matrix_of("CRY", [ty]) @ amps),
                atol=1e-12,
            )

    def test_batched_angles(self):
        angles = np.array([0.1, 0.2, 0.3])
        blocks = target_block("RY", [angles])
        assert blocks.shape == (3, 2, 2)
        assert_allclose(blocks[1], target_block("RY", [0.2]))

    def test_wrong_arity(self):
        with pytest.raises(GateError, match="parameter"):
            matrix_of("RY", [])


# ---------------------------------------------------------------------------
# derivatives
# ---------------------------------------------------------------------------

class TestDerivatives:
    def test_rz_at_zero(self):
        assert_allclose(param_derivative("RZ", [0.0], 0), np.diag([-0.5j, 0.5j]), atol=1e-12)

    def test_ry_at_zero(self):
        assert_allclose(param_derivative("RY", [0.0], 0), [[0, -0.5], [0.5, 0]], atol=1e-12)

    @pytest.mark.parametrize("kind", PARAMETERISED)
    def test_matches_finite_differences(self, kind):
        rng = np.random.default_rng(1)
        for _ in range(100):
            params = list(rng.uniform(-math.pi, math.pi, kind.arity))
            for which in range(kind.arity):
                analytic = param_derivative(kind, params, which)
                assert np.max(np.abs(analytic - _fd(kind, params, which))) < 1e-7

    def test_no_parameter_to_differentiate(self):
        with pytest.raises(GateError, match="no parameters"):
            block_derivative("H", [], 0)

    def test_index_out_of_range(self):
        with pytest.raises(GateError, match="no parameter 1"):
            block_derivative("RY", [0.3], 1)


# ---------------------------------------------------------------------------
# slots, ops and shift rules
# ---------------------------------------------------------------------------

class TestGateOp:
    def test_wrong_qubit_count(self):
        with pytest.raises(GateError, match="qubit"):
            GateOp(GateKind.CNOT, (0,))

    def test_duplicate_targets(self):
        with pytest.raises(GateError, match="distinct"):
            GateOp(GateKind.CRY, (1, 1), (Trainable(0),))

    def test_wrong_parameter_count(self):
        with pytest.raises(GateError, match="parameter"):
            GateOp(GateKind.R3, (0,), (Trainable(0),))

    def test_control_and_target(self):
        op = GateOp(GateKind.CRZ, (2, 0), (Fixed(0.1),))
        assert op.control == 2
        assert op.target == 0

    def test_embedded_range_must_increase(self):
        with pytest.raises(GateError, match="lo < hi"):
            Embedded(0, 1.0, 1.0)

    def test_cyz_decomposes_into_two_primitives(self):
        op = GateOp(GateKind.CYZ, (0, 1), (Trainable(0), Trainable(1)))
        kinds = [prim.kind for prim in decompose(op)]
        assert kinds == [GateKind.CRY, GateKind.CRZ]

    def test_cyz_accepts_radians(self):
        first, second = cyz(0.5, 0.25, 1, 0)
        assert first.params == (Fixed(0.5),)
        assert second.targets == (1, 0)


class TestShiftRules:
    def test_rotations_use_two_terms(self):
        for kind in ("RX", "RY", "RZ", "R3", None):
            assert shift_rule(kind) == TWO_TERM

    def test_controlled_rotations_use_four_terms(self):
        assert shift_rule("CRY") == FOUR_TERM
        assert shift_rule("CRZ") == FOUR_TERM

    @pytest.mark.parametrize("kind", ["CRY", "CRZ"])
    def test_four_term_rule_is_exact(self, kind):
        rng = np.random.default_rng(2)
        # Observable X on the target for CRZ (Z would commute), Z otherwise.
        pauli = np.array([[0, 1], [1, 0]]) if kind == "CRZ" else np.diag([1.0, -1.0])
        obs = np.kron(np.eye(2), pauli)
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi /= np.linalg.norm(psi)

        def f(theta: float) -> float:
            out = matrix_of(kind, [theta]) @ psi
            return float(np.real(out.conj() @ obs @ out))

        for theta in rng.uniform(-math.pi, math.pi, 10):
            exact = (f(theta + 1e-6) - f(theta - 1e-6)) / 2e-6
            shifted = sum(c * f(theta + s) for c, s in FOUR_TERM)
            assert shifted == pytest.approx(exact, abs=1e-8)

    def test_cyz_has_no_rule_of_its_own(self):
        with pytest.raises(GateError, match="decompose"):
            shift_rule("CYZ")

    def test_fixed_gate_has_no_rule(self):
        with pytest.raises(GateError, match="no trainable"):
            shift_rule("CNOT")
