"""Tests for the empirical Fisher matrix, its spectrum and the exported tables."""
from __future__ import annotations

import logging

import numpy as np
import pandas as pd
import pytest
import torch
from numpy.testing import assert_allclose, assert_array_equal

from app.core.artifacts import write_table
from app.modules.analysis import (
    FimConfig,
    FimError,
    eigen_density,
    empirical_fim,
    fim_from_scores,
    heatmap_table,
    load_heatmap,
    spectrum_compare,
)
from app.modules.data import Dataset, gen_moon
from app.modules.hybrid import ModelConfig, build_classical_model, build_hybrid_model, cross_entropy

# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

SMALL = ModelConfig(n_nodes=1, qubits_per_node=2, ppel_layers=1, hidden=[8, 8, 4, 4], dropout=0.0)


def _oracle_fim(model, dataset: Dataset) -> np.ndarray:
    """Per-sample backward passes, accumulated outer products."""
    params = [node.theta for node in model.nodes] + list(model.head.parameters())
    if model.frontend is not None:
        params += list(model.frontend.parameters())
    model.eval()
    x = torch.as_tensor(dataset.features, dtype=torch.float64)
    total = None
    for i in range(dataset.n_samples):
        model.zero_grad()
        cross_entropy(model(x[i : i + 1]), [int(dataset.labels[i])]).backward()
        g = torch.cat([(p.grad if p.grad is not None else torch.zeros_like(p)).reshape(-1) for p in params])
        outer = np.outer(g.numpy(), g.numpy())
        total = outer if total is None else total + outer
    return total / dataset.n_samples


# ---------------------------------------------------------------------------
# matrix from scores
# ---------------------------------------------------------------------------


class TestFimFromScores:
    def test_symmetric_psd_with_normalised_density(self):
        scores = np.random.default_rng(0).normal(size=(40, 6))
        spectrum = fim_from_scores(scores, bins=10)
        assert_allclose(spectrum.matrix, spectrum.matrix.T)
        assert spectrum.eigenvalues.min() >= 0.0
        assert spectrum.density.sum() == pytest.approx(1.0)
        assert len(spectrum.bin_edges) == 11
        assert spectrum.n_samples == 40

    def test_single_parameter_is_mean_squared_score(self):
        spectrum = fim_from_scores(np.array([[1.0], [2.0], [3.0]]))
        assert spectrum.matrix[0, 0] == pytest.approx(14.0 / 3.0)
        assert spectrum.max_eigenvalue == pytest.approx(14.0 / 3.0)

    def test_rank_one(self):
        spectrum = fim_from_scores(np.array([[1.0, 2.0]]))
        assert spectrum.positive.size == 1
        assert spectrum.max_eigenvalue == pytest.approx(5.0)

    def test_zero_scores_omit_the_density(self, caplog):
        with caplog.at_level(logging.WARNING):
            spectrum = fim_from_scores(np.zeros((3, 2)), label="flat")
        assert spectrum.density is None
        assert spectrum.bin_centres() is None
        assert "no positive eigenvalue" in caplog.text

    @pytest.mark.parametrize("scores", [np.zeros((0, 3)), np.zeros(4)])
    def test_shape_checked(self, scores):
        with pytest.raises(FimError, match="non-empty"):
            fim_from_scores(scores)

    def test_non_finite(self):
        with pytest.raises(FimError, match="non-finite"):
            fim_from_scores(np.array([[1.0, np.nan]]))

    def test_density_over_positive_eigenvalues_only(self):
        density, edges = eigen_density(np.array([0.0, 0.0, 0.5, 2.0]), bins=2)
        assert_allclose(density, [0.5, 0.5])
        assert_allclose(edges, [0.0, 1.0, 2.0])


# ---------------------------------------------------------------------------
# empirical Fisher of a model
# ---------------------------------------------------------------------------


class TestEmpiricalFim:
    def test_matches_per_sample_backward(self):
        dataset = gen_moon(8, seed=1)
        model = build_hybrid_model(SMALL, 2, 2, seed=0)
        spectrum = empirical_fim(model, dataset, max_params=10_000)
        assert_allclose(spectrum.matrix, _oracle_fim(model, dataset), atol=1e-10)

    def test_sample_order_does_not_matter(self):
        dataset = gen_moon(10, seed=2)
        order = np.random.default_rng(0).permutation(dataset.n_samples)
        shuffled = Dataset(dataset.features[order], dataset.labels[order], 2)
        model = build_hybrid_model(SMALL, 2, 2, seed=0)
        a = empirical_fim(model, dataset).matrix
        b = empirical_fim(model, shuffled).matrix
        assert_allclose(a, b, atol=1e-9)

    def test_heatmap_is_truncated_to_max_params(self):
        model = build_hybrid_model(SMALL, 2, 2, seed=0)
        spectrum = empirical_fim(model, gen_moon(20, seed=0), max_params=100, max_samples=5)
        assert spectrum.matrix.shape == (100, 100)
        assert spectrum.n_samples == 5

    def test_quantum_scope(self):
        model = build_hybrid_model(SMALL, 2, 2, seed=0)
        spectrum = empirical_fim(model, gen_moon(6, seed=0), scope="quantum")
        assert spectrum.n_params == model.nodes[0].circuit.n_trainable

    def test_quantum_scope_needs_nodes(self):
        model = build_classical_model(2, 2, seed=0)
        with pytest.raises(FimError, match="no quantum parameters"):
            empirical_fim(model, gen_moon(6), scope="quantum")

    def test_unknown_scope(self):
        model = build_hybrid_model(SMALL, 2, 2)
        with pytest.raises(FimError, match="unknown scope"):
            empirical_fim(model, gen_moon(6), scope="head")

    def test_training_mode_restored(self):
        model = build_hybrid_model(SMALL, 2, 2)
        model.train()
        empirical_fim(model, gen_moon(4))
        assert model.training


# ---------------------------------------------------------------------------
# reports and files
# ---------------------------------------------------------------------------


class TestReports:
    def test_compare_reports_both_models(self):
        rng = np.random.default_rng(1)
        classical = fim_from_scores(rng.normal(size=(10, 3)), bins=4, label="classical")
        hybrid = fim_from_scores(rng.normal(size=(10, 3)), bins=4, label="hybrid")
        report = spectrum_compare(classical, hybrid)
        summary = report.summary()
        assert list(summary["model"]) == ["classical", "hybrid"]
        assert not summary["density_omitted"].any()
        densities = report.densities()
        assert len(densities) == 8
        assert set(densities["model"]) == {"classical", "hybrid"}

    def test_heatmap_round_trip(self, tmp_path):
        spectrum = fim_from_scores(np.random.default_rng(2).normal(size=(12, 5)))
        table = heatmap_table(spectrum)
        path = write_table(table, tmp_path, "fim_heatmap.csv", command="fim", config=FimConfig(), seed=0)
        assert_array_equal(load_heatmap(path), spectrum.matrix)

    def test_heatmap_must_be_square(self, tmp_path):
        path = tmp_path / "bad.csv"
        pd.DataFrame({"p0": [1.0, 2.0, 3.0], "p1": [0.0, 1.0, 2.0]}).to_csv(path, index=False)
        with pytest.raises(FimError, match="square"):
            load_heatmap(path)
