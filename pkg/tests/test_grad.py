"""Tests for the gradient engines, backend dispatch and AAO growth."""
from __future__ import annotations

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.modules.circuit import (
    ParamCircuit,
    SlotAllocator,
    build_ppel,
    build_qpie_vqc,
    build_random_circuit,
    build_ry_product,
    gate,
)
from app.modules.engine import AnalyticSV, NoisyDM, SampledSV, ZString, run
from app.modules.gates import Fixed, GateKind, Trainable
from app.modules.grad import (
    Candidate,
    CandidatePool,
    DispatchError,
    GradcheckConfig,
    GradientError,
    GradMethod,
    aao_scores,
    aao_step,
    grad_adjoint,
    grad_dispatch,
    grad_finite_diff,
    grad_param_shift,
    gradient,
    max_deviation,
    shot_sigma,
)
from app.modules.grad.commands import gradcheck_table

Z0 = ZString((0,))


def _ppel_circuit(n: int, layers: int) -> ParamCircuit:
    alloc = SlotAllocator()
    nodes = [gate(GateKind.H, q) for q in range(n)] + build_ppel(n, layers, allocator=alloc)
    return ParamCircuit(n, 0, tuple(nodes), n_trainable=alloc.next_index, n_features=0)


def _ry_chain(n_gates: int, n_trainable: int) -> ParamCircuit:
    """``n_gates`` RY gates on two qubits; the first ``n_trainable`` are trainable."""
    nodes = []
    for k in range(n_gates):
        param = Trainable(k) if k < n_trainable else Fixed(0.1 * k)
        nodes.append(gate(GateKind.RY, k % 2, params=[param]))
    return ParamCircuit(2, 0, tuple(nodes), n_trainable=n_trainable, n_features=0)


# ---------------------------------------------------------------------------
# single-gate exactness
# ---------------------------------------------------------------------------

class TestExactness:
    def test_param_shift_on_single_ry(self):
        circuit = build_ry_product(1)
        for theta in np.linspace(-math.pi, math.pi, 100):
            grad = grad_param_shift(circuit, [theta], observable=Z0)
            assert abs(grad.values[0] + math.sin(theta)) < 1e-12

    def test_adjoint_on_single_ry(self):
        grad = grad_adjoint(build_ry_product(1), [math.pi / 3], observable=Z0)
        assert grad.values[0] == pytest.approx(-math.sin(math.pi / 3), abs=1e-10)

    def test_finite_diff_on_single_ry(self):
        grad = grad_finite_diff(build_ry_product(1), [math.pi / 3], observable=Z0)
        assert grad.values[0] == pytest.approx(-0.86603, abs=1e-5)

    def test_controlled_rotation_four_term(self):
        # H on the control, CRY on the target: <Z1> = (1 + cos t) / 2.
        nodes = (gate(GateKind.H, 0), gate(GateKind.CRY, 0, 1, params=[Trainable(0)]))
        circuit = ParamCircuit(2, 0, nodes, n_trainable=1, n_features=0)
        for theta in np.linspace(-3, 3, 13):
            expected = -0.5 * math.sin(theta)
            assert grad_param_shift(circuit, [theta], observable=ZString((1,))).values[0] == pytest.approx(
                expected, abs=1e-12
            )
            assert grad_adjoint(circuit, [theta], observable=ZString((1,))).values[0] == pytest.approx(
                expected, abs=1e-10
            )

    def test_shared_index_accumulates(self):
        nodes = (gate(GateKind.RY, 0, params=[Trainable(0)]), gate(GateKind.RY, 0, params=[Trainable(0)]))
        circuit = ParamCircuit(1, 0, nodes, n_trainable=1, n_features=0)
        theta = 0.4
        expected = -2 * math.sin(2 * theta)
        for engine in (grad_param_shift, grad_adjoint, grad_finite_diff):
            assert engine(circuit, [theta], observable=Z0).values[0] == pytest.approx(expected, abs=1e-8)


# ---------------------------------------------------------------------------
# engine agreement
# ---------------------------------------------------------------------------

class TestAgreement:
    def test_ppel_circuit_matches_finite_differences(self):
        circuit = _ppel_circuit(4, 3)
        theta = np.random.default_rng(0).uniform(-math.pi, math.pi, circuit.n_trainable)
        obs = [ZString((0,)), ZString((1, 3), 0.5)]
        fd = grad_finite_diff(circuit, theta, observable=obs).values
        assert_allclose(grad_param_shift(circuit, theta, observable=obs).values, fd, atol=1e-6)
        assert_allclose(grad_adjoint(circuit, theta, observable=obs).values, fd, atol=1e-6)

    def test_adjoint_matches_param_shift_tightly(self):
        circuit = build_random_circuit(5, 20, seed=4)
        theta = np.random.default_rng(1).uniform(-math.pi, math.pi, 20)
        psr = grad_param_shift(circuit, theta, observable=Z0).values
        assert_allclose(grad_adjoint(circuit, theta, observable=Z0).values, psr, atol=1e-8)

    def test_frozen_branches_keep_engines_consistent(self):
        rng = np.random.default_rng(2)
        for seed in range(10):
            circuit = build_random_circuit(3, 8, seed=seed, conditional=True)
            theta = rng.uniform(-math.pi, math.pi, circuit.n_trainable)
            fd = grad_finite_diff(circuit, theta, observable=Z0).values
            assert_allclose(grad_param_shift(circuit, theta, observable=Z0).values, fd, atol=1e-6)
            assert_allclose(grad_adjoint(circuit, theta, observable=Z0).values, fd, atol=1e-6)

    def test_qpie_circuit_feature_gradients(self):
        circuit = build_qpie_vqc(2, 2, ppel_layers=3)
        rng = np.random.default_rng(3)
        theta = rng.uniform(-1, 1, circuit.n_trainable)
        feats = rng.uniform(0.2, 2.9, (3, 2))
        weights = rng.normal(size=(3, 3))
        fd = grad_finite_diff(circuit, theta, feats, weights=weights, with_features=True)
        for engine in (grad_param_shift, grad_adjoint):
            got = engine(circuit, theta, feats, weights=weights, with_features=True)
            assert_allclose(got.values, fd.values, atol=1e-6)
            assert got.feature_values.shape == (3, 2)
            assert_allclose(got.feature_values, fd.feature_values, atol=1e-6)

    def test_weights_form_a_vector_jacobian_product(self):
        circuit = build_random_circuit(3, 9, seed=8)
        theta = np.random.default_rng(4).uniform(-math.pi, math.pi, 9)
        obs = [ZString((0,)), ZString((2,))]
        combined = grad_adjoint(circuit, theta, observable=obs, weights=[0.7, -1.3]).values
        first = grad_adjoint(circuit, theta, observable=obs[0]).values
        second = grad_adjoint(circuit, theta, observable=obs[1]).values
        assert_allclose(combined, 0.7 * first - 1.3 * second, atol=1e-12)

    def test_weight_shape_checked(self):
        with pytest.raises(GradientError, match="weights"):
            grad_param_shift(build_ry_product(1), [0.1], observable=Z0, weights=[[1.0, 2.0]])

    @pytest.mark.slow
    def test_fifty_random_circuits_agree(self):
        table = gradcheck_table(GradcheckConfig())
        assert table["circuit"].nunique() == 50
        assert table["max_deviation"].max() < 1e-6


# ---------------------------------------------------------------------------
# cost and dispatch
# ---------------------------------------------------------------------------

class TestCostAndDispatch:
    def test_adjoint_cost_independent_of_trainable_count(self):
        many = grad_adjoint(_ry_chain(40, 40), np.full(40, 0.2), observable=Z0)
        one = grad_adjoint(_ry_chain(40, 1), [0.2], observable=Z0)
        assert many.gate_applications == one.gate_applications

    def test_adjoint_beats_param_shift_tenfold(self):
        circuit = _ry_chain(40, 40)
        theta = np.full(40, 0.2)
        adjoint = grad_adjoint(circuit, theta, observable=Z0)
        psr = grad_param_shift(circuit, theta, observable=Z0)
        assert psr.gate_applications >= 10 * adjoint.gate_applications
        assert psr.circuit_evals == 80

    def test_adjoint_needs_the_analytic_backend(self):
        with pytest.raises(DispatchError, match="analytic"):
            grad_adjoint(build_ry_product(1), [0.1], observable=Z0, backend=NoisyDM())

    def test_dispatch(self):
        assert grad_dispatch(AnalyticSV()).kind == "adjoint"
        assert grad_dispatch(SampledSV()).kind == "param_shift"
        assert grad_dispatch(NoisyDM()).kind == "param_shift"

    def test_gradient_on_noisy_backend_matches_its_own_finite_differences(self):
        circuit = build_random_circuit(2, 5, seed=2)
        theta = np.random.default_rng(5).uniform(-math.pi, math.pi, 5)
        noisy = NoisyDM()
        dispatched = gradient(circuit, theta, None, noisy, Z0)
        fd = gradient(circuit, theta, None, noisy, Z0, method=GradMethod.finite_diff())
        assert dispatched.method.kind == "param_shift"
        assert_allclose(dispatched.values, fd.values, atol=1e-6)

    def test_method_validation(self):
        with pytest.raises(GradientError, match="step"):
            GradMethod.finite_diff(0.0)
        with pytest.raises(GradientError, match="no step"):
            GradMethod("adjoint", 1e-3)
        with pytest.raises(GradientError, match="unknown"):
            GradMethod("backprop")

    def test_values_are_read_only(self):
        grad = grad_param_shift(build_ry_product(1), [0.3], observable=Z0)
        with pytest.raises(ValueError):
            grad.values[0] = 1.0


class TestSampled:
    def test_param_shift_within_shot_noise(self):
        shots = 4000
        backend = SampledSV(shots=shots, seed=11)
        circuit = build_ry_product(1)
        for theta in (0.3, 1.2, 2.5):
            grad = grad_param_shift(circuit, [theta], backend=backend, observable=Z0)
            sigma = 0.5 * (
                shot_sigma(math.cos(theta + math.pi / 2), shots) + shot_sigma(math.cos(theta - math.pi / 2), shots)
            )
            assert abs(grad.values[0] + math.sin(theta)) < 5 * sigma

    def test_shot_sigma(self):
        assert shot_sigma(0.0, 100) == pytest.approx(0.1)
        assert shot_sigma(1.0, 100) == 0.0


# ---------------------------------------------------------------------------
# AAO
# ---------------------------------------------------------------------------

def _plus_state(n: int) -> ParamCircuit:
    return ParamCircuit(n, 0, tuple(gate(GateKind.H, q) for q in range(n)), n_trainable=0, n_features=0)


class TestAao:
    def test_default_pool(self):
        pool = CandidatePool.default([0, 1, 2])
        labels = [c.label() for c in pool.candidates]
        assert labels[:3] == ["RY(0)", "RY(1)", "RY(2)"]
        assert "CRY(2,0)" in labels
        assert "CRZ(0,1)" in labels
        assert len(labels) == 9

    def test_single_qubit_pool(self):
        assert [c.label() for c in CandidatePool.default([0]).candidates] == ["RY(0)"]

    def test_scores(self):
        pool = CandidatePool.default([0, 1])
        scores = aao_scores(_plus_state(2), [], None, None, Z0, pool)
        by_label = dict(zip([c.label() for c in pool.candidates], scores, strict=True))
        assert by_label["RY(0)"] == pytest.approx(1.0, abs=1e-12)
        assert by_label["RY(1)"] == pytest.approx(0.0, abs=1e-12)
        assert by_label["CRY(1,0)"] == pytest.approx(0.5, abs=1e-12)

    def test_step_appends_the_best_candidate(self):
        pool = CandidatePool.default([0, 1])
        circuit, theta = aao_step(_plus_state(2), [], None, None, Z0, pool)
        assert circuit.n_trainable == 1
        assert circuit.nodes[-1].op.kind is GateKind.RY
        assert circuit.nodes[-1].op.targets == (0,)
        assert_allclose(theta, [0.0])

    def test_ties_pick_the_lowest_index(self):
        pool = CandidatePool((Candidate(GateKind.RY, (1,)), Candidate(GateKind.RY, (0,))))
        circuit, _ = aao_step(build_ry_product(2), [0.0, 0.0], None, None, Z0, pool)
        # Both candidates score zero on |00> with Z0.
        assert circuit.nodes[-1].op.targets == (1,)

    def test_growth_lowers_the_cost(self):
        circuit, theta = aao_step(_plus_state(1), [], None, None, Z0, CandidatePool.default([0]))
        for _ in range(30):
            theta = theta - 0.3 * gradient(circuit, theta, None, None, Z0).values
        assert run(circuit, theta, observables=Z0).expectations[0] < -0.99

    def test_candidate_validation(self):
        with pytest.raises(GradientError, match="RY, CRY or CRZ"):
            Candidate(GateKind.RX, (0,))
        with pytest.raises(GradientError, match="empty"):
            CandidatePool(())


def test_max_deviation():
    assert_allclose(max_deviation([np.array([1.0, 2.0]), np.array([1.5, 2.0]), np.array([0.5, 2.1])]), [1.0, 0.1])
