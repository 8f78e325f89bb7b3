"""Tests for the hybrid model, the training loop, VQE and checkpoints.

Covers:
- DenseNet shape and layer freezing
- QuantumNode gradients through torch autograd against the shift rule
- softmax outputs, cross-entropy clamping, regression heads
- the training trace and step learning-rate decay
- frontend pre-training with frozen layers
- VQE convergence on Z-string Hamiltonians
- checkpoint save/load
- slow end-to-end checks on moon, spiral, noisy evaluation and NARMA
"""
from __future__ import annotations

import logging
import math

import numpy as np
import pytest
import torch
from numpy.testing import assert_allclose

from app.modules.circuit import build_qpie_vqc, build_ry_product
from app.modules.data import Dataset, gen_circles, gen_moon, gen_narma, gen_spiral, narma_windows, noisy_target
from app.modules.engine import AnalyticSV, NoisyDM, ZString
from app.modules.grad import grad_param_shift
from app.modules.hybrid import (
    DenseNet,
    HybridModel,
    ModelConfig,
    QuantumNode,
    TrainConfig,
    TrainingError,
    VqeConfig,
    ZTerm,
    accuracy,
    build_classical_model,
    build_hybrid_model,
    cross_entropy,
    forward,
    ground_energy,
    hamiltonian_matrix,
    load_checkpoint,
    pretrain_transfer,
    save_checkpoint,
    train,
    vqe_minimize,
)

# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _small_config(**overrides) -> ModelConfig:
    base = {"n_nodes": 1, "qubits_per_node": 2, "ppel_layers": 1, "hidden": [8, 8, 4, 4], "dropout": 0.0}
    return ModelConfig(**{**base, **overrides})


def _quiet(**overrides) -> TrainConfig:
    return TrainConfig(**{"log_every": 0, **overrides})


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------


class TestDenseNet:
    def test_five_layers(self):
        net = DenseNet(2, 3, (8, 8, 4, 4), 0.0)
        assert len(net.layers) == 5
        out = net(torch.zeros(7, 2, dtype=torch.float64))
        assert out.shape == (7, 3)

    def test_freeze_first_layers(self):
        net = DenseNet(2, 3, (8, 8, 4, 4), 0.0)
        net.freeze(2)
        assert net.freeze_mask == [True, True, False, False, False]
        assert not net.layers[0].weight.requires_grad
        assert not net.layers[1].bias.requires_grad
        assert net.layers[2].weight.requires_grad

    def test_freeze_range(self):
        with pytest.raises(TrainingError, match="can freeze"):
            DenseNet(2, 3).freeze(5)

    def test_four_hidden_widths(self):
        with pytest.raises(TrainingError, match="four hidden widths"):
            DenseNet(2, 3, (8, 8))


class TestQuantumNode:
    def test_autograd_matches_shift_rule(self):
        circuit = build_qpie_vqc(2, 2, ppel_layers=1)
        node = QuantumNode(circuit, seed=3)
        rng = np.random.default_rng(0)
        feats_np = rng.uniform(0.2, 2.5, (5, circuit.n_features))
        weights = rng.normal(size=(5, node.n_outputs))

        feats = torch.tensor(feats_np, dtype=torch.float64, requires_grad=True)
        out = node(feats)
        assert out.shape == (5, node.n_outputs)
        (out * torch.as_tensor(weights)).sum().backward()

        expected = grad_param_shift(
            circuit,
            node.theta.detach().numpy(),
            feats_np,
            AnalyticSV(),
            node.observables,
            weights=weights,
            with_features=True,
        )
        assert_allclose(node.theta.grad.numpy(), expected.values, atol=1e-9)
        assert_allclose(feats.grad.numpy(), expected.feature_values, atol=1e-9)

    def test_seeded_initialisation(self):
        circuit = build_qpie_vqc(2, 2, ppel_layers=1)
        a, b = QuantumNode(circuit, seed=4), QuantumNode(circuit, seed=4)
        assert torch.equal(a.theta, b.theta)
        assert float(a.theta.abs().max()) <= math.pi / 4


class TestHybridModel:
    def test_probabilities_sum_to_one(self):
        model = build_hybrid_model(_small_config(), 2, 2, seed=0)
        x = np.random.default_rng(1).normal(size=(100, 2))
        probs = forward(model, x)
        assert probs.shape == (100, 2)
        assert np.all(probs >= 0)
        assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_embedded_angles_stay_in_range(self):
        model = build_hybrid_model(_small_config(), 2, 2, seed=0)
        x = torch.as_tensor(np.random.default_rng(2).normal(scale=50.0, size=(30, 2)))
        (angles,) = model.node_inputs(x)
        assert float(angles.min()) >= 0.0
        assert float(angles.max()) <= math.pi

    def test_regression_head(self):
        model = build_hybrid_model(_small_config(), 3, 1, task="regression", seed=0)
        assert forward(model, np.zeros((4, 3))).shape == (4,)

    def test_without_frontend_the_width_must_match(self):
        with pytest.raises(TrainingError, match="input width"):
            build_hybrid_model(_small_config(frontend=False), 3, 2)

    def test_input_shape_checked(self):
        model = build_hybrid_model(_small_config(), 2, 2)
        with pytest.raises(TrainingError, match="model expects"):
            forward(model, np.zeros((4, 3)))

    def test_classical_baseline_has_no_nodes(self):
        model = build_classical_model(2, 2, seed=0)
        assert len(model.nodes) == 0
        assert_allclose(forward(model, np.zeros((3, 2))).sum(axis=1), 1.0)


class TestCrossEntropy:
    def test_value(self):
        loss = cross_entropy([[0.25, 0.75]], [1])
        assert float(loss) == pytest.approx(-math.log(0.75))

    def test_tiny_probability_is_clamped(self, caplog):
        with caplog.at_level(logging.WARNING):
            loss = cross_entropy([[1e-20, 1.0 - 1e-20]], [0])
        assert float(loss) == pytest.approx(-math.log(1e-12))
        assert "clamped" in caplog.text

    def test_label_range(self):
        with pytest.raises(TrainingError, match="labels must lie in"):
            cross_entropy([[0.5, 0.5]], [2])


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


class TestTrain:
    def test_trace_and_step_decay(self):
        dataset = gen_moon(20, seed=0)
        model = build_hybrid_model(_small_config(), 2, 2, seed=0)
        model, trace = train(model, dataset, _quiet(epochs=4, lr=0.05, decay_every=2, gamma=0.5))
        assert len(trace) == 4
        assert trace.lr == pytest.approx([0.05, 0.05, 0.025, 0.025])
        assert all(np.isfinite(trace.loss))
        assert all(0.0 <= a <= 1.0 for a in trace.accuracy)
        assert set(trace.as_columns()) == {"epoch", "loss", "accuracy", "grad_norm", "lr"}
        assert not model.training

    def test_zero_epochs_returns_empty_trace(self):
        model = build_hybrid_model(_small_config(), 2, 2)
        _, trace = train(model, gen_moon(10), _quiet(epochs=0))
        assert len(trace) == 0

    def test_labels_must_fit_the_head(self):
        dataset = Dataset(np.zeros((3, 2)), [0, 1, 2], 3)
        model = build_hybrid_model(_small_config(), 2, 2)
        with pytest.raises(TrainingError, match="labels exceed"):
            train(model, dataset, _quiet(epochs=1))

    def test_empty_dataset(self):
        model = build_hybrid_model(_small_config(), 2, 2)
        with pytest.raises(TrainingError, match="empty"):
            train(model, Dataset(np.zeros((0, 2)), [], 2), _quiet(epochs=1))

    def test_seeded_training_is_repeatable(self):
        dataset = gen_moon(16, seed=2)
        runs = []
        for _ in range(2):
            model = build_hybrid_model(_small_config(), 2, 2, seed=5)
            _, trace = train(model, dataset, _quiet(epochs=2, seed=5))
            runs.append(trace.loss)
        assert runs[0] == runs[1]

    def test_target_schedule_replaces_regression_targets(self):
        series = gen_narma(5, 25, 0)
        inputs, targets = narma_windows(series)
        dataset = Dataset(inputs, targets, 0)
        model = build_hybrid_model(_small_config(), 5, 1, task="regression", seed=0)
        seen = []

        def schedule(epoch):
            seen.append(epoch)
            return noisy_target(targets, epoch, alpha=0.1).values

        _, trace = train(model, dataset, _quiet(epochs=3), target_schedule=schedule)
        assert seen == [0, 1, 2]
        assert len(trace) == 3
        assert all(math.isnan(a) for a in trace.accuracy)


class TestPretrain:
    def test_frozen_layers_survive_later_training(self):
        frontend = DenseNet(2, 2, (8, 8, 4, 4), 0.0)
        pretrain_transfer(frontend, gen_circles(20, seed=1), 2, _quiet(epochs=2))
        assert frontend.freeze_mask == [True, True, False, False, False]

        frozen = frontend.layers[0].weight.detach().clone()
        free = frontend.layers[4].weight.detach().clone()
        node = QuantumNode(build_qpie_vqc(2, 2, ppel_layers=1), seed=0)
        model = HybridModel([node], 2, frontend=frontend)
        train(model, gen_moon(12, seed=0), _quiet(epochs=2, lr=0.05))

        assert torch.equal(frontend.layers[0].weight, frozen)
        assert not torch.equal(frontend.layers[4].weight, free)

    def test_freeze_count_checked(self):
        with pytest.raises(TrainingError, match="freeze_first"):
            pretrain_transfer(DenseNet(2, 2), gen_circles(10), 5, _quiet(epochs=0))


# ---------------------------------------------------------------------------
# VQE
# ---------------------------------------------------------------------------


class TestVqe:
    def test_single_z(self):
        config = VqeConfig(n_qubits=1, hamiltonian=[ZTerm(qubits=[0])])
        result = vqe_minimize(build_ry_product(1), [ZString((0,))], config, theta0=np.array([0.3]))
        assert result.converged
        assert result.energy == pytest.approx(-1.0, abs=1e-4)
        assert result.ground_energy == pytest.approx(-1.0)

    def test_two_independent_terms(self):
        hamiltonian = [ZString((0,)), ZString((1,))]
        result = vqe_minimize(build_ry_product(2), hamiltonian, VqeConfig(), theta0=np.array([0.3, -0.5]))
        assert result.energy == pytest.approx(-2.0, abs=1e-3)
        assert min(result.energies) >= result.ground_energy - 1e-9

    def test_max_iter_zero(self):
        config = VqeConfig(n_qubits=1, hamiltonian=[ZTerm(qubits=[0])], max_iter=0)
        result = vqe_minimize(build_ry_product(1), [ZString((0,))], config)
        assert len(result.energies) == 1
        assert not result.converged

    def test_unconverged_returns_best_point(self):
        # lr 3.0 overshoots: cos(theta) goes -0.80, -0.41, 0.02, -0.16
        config = VqeConfig(n_qubits=1, hamiltonian=[ZTerm(qubits=[0])], lr=3.0, max_iter=3)
        result = vqe_minimize(build_ry_product(1), [ZString((0,))], config, theta0=np.array([2.5]))
        assert not result.converged
        assert len(result.energies) == 4
        assert result.energies[-1] > result.best_energy
        assert_allclose(result.theta, [2.5])
        assert result.energy == result.best_energy == pytest.approx(math.cos(2.5))

    def test_ground_energy(self):
        assert ground_energy([ZString((0, 1))], 2) == pytest.approx(-1.0)
        assert ground_energy([ZString((0,), 0.5), ZString((1,), -2.0)], 2) == pytest.approx(-2.5)

    def test_hamiltonian_matrix(self):
        assert_allclose(hamiltonian_matrix([ZString((0,), 2.0)], 1), np.diag([2.0, -2.0]))

    def test_config_rejects_out_of_range_terms(self):
        with pytest.raises(ValueError, match="outside"):
            VqeConfig(n_qubits=1)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


class TestCheckpoint:
    def test_round_trip_preserves_predictions(self, tmp_path):
        config = _small_config()
        model = build_hybrid_model(config, 2, 2, seed=1)
        model.frontend.freeze(1)
        path = save_checkpoint(model, tmp_path, config=config, seed=1)

        loaded, doc = load_checkpoint(path)
        x = np.random.default_rng(3).normal(size=(10, 2))
        assert_allclose(forward(loaded, x), forward(model, x), rtol=0, atol=1e-12)
        assert doc["seed"] == 1
        assert loaded.frontend.freeze_mask == model.frontend.freeze_mask

    def test_unreadable_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(TrainingError, match="cannot read"):
            load_checkpoint(path)


# ---------------------------------------------------------------------------
# end-to-end (slow)
# ---------------------------------------------------------------------------


@pytest.mark.slow
class TestBenchmarks:
    def test_moon_accuracy_and_noise_resilience(self):
        dataset = gen_moon(600, seed=0)
        model = build_hybrid_model(ModelConfig(), 2, 2, seed=0)
        model, trace = train(model, dataset, _quiet(epochs=100))
        assert len(trace) == 100
        clean = accuracy(model, dataset, AnalyticSV())
        assert clean >= 0.95
        assert clean - accuracy(model, dataset, NoisyDM()) < 0.10

    def test_spiral_accuracy(self):
        dataset = gen_spiral(600, seed=0)
        model = build_hybrid_model(ModelConfig(), 2, 2, seed=0)
        model, _ = train(model, dataset, _quiet(epochs=100))
        assert accuracy(model, dataset) >= 0.90

    def test_narma_mse_trends_down(self):
        series = gen_narma(5, 105, 0)
        inputs, targets = narma_windows(series)
        dataset = Dataset(inputs, targets, 0)
        model = build_hybrid_model(ModelConfig(n_nodes=1, dropout=0.0, ppel_layers=3), 5, 1, task="regression")
        noise = [noisy_target(series, epoch).values[5:] for epoch in range(50)]
        _, trace = train(model, dataset, _quiet(epochs=50, lr=0.002), target_schedule=lambda e: noise[e])
        moving = np.convolve(np.asarray(trace.loss), np.ones(5) / 5, mode="valid")
        assert np.all(np.diff(moving) < 0)
