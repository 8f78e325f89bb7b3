"""Empirical Fisher information and its eigenvalue spectrum."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import torch
from scipy import linalg

from app.core.artifacts import read_table
from app.core.config import settings
from app.modules.data import Dataset
from app.modules.hybrid import HybridModel
from app.modules.hybrid.model import DTYPE, PROB_FLOOR, AnyBackend

logger = logging.getLogger(__name__)

PSD_TOL = 1e-9
SYMMETRY_TOL = 1e-10
POSITIVE_TOL = 1e-10


class FimError(ValueError):
    """Raised when a Fisher estimate cannot be formed."""


@dataclass(frozen=True)
class FimSpectrum:
    """Fisher matrix, its ascending eigenvalues and the density of the positive ones.

    ``density`` is None when no eigenvalue is positive.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    density: np.ndarray | None
    bin_edges: np.ndarray | None
    n_samples: int
    label: str = ""

    @property
    def n_params(self) -> int:
        return self.matrix.shape[0]

    @property
    def positive(self) -> np.ndarray:
        return self.eigenvalues[self.eigenvalues > POSITIVE_TOL]

    @property
    def max_eigenvalue(self) -> float:
        return float(self.eigenvalues[-1]) if self.eigenvalues.size else 0.0

    def bin_centres(self) -> np.ndarray | None:
        if self.bin_edges is None:
            return None
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


def eigen_density(eigenvalues: np.ndarray, bins: int | None = None) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Count(lambda) / total over the positive eigenvalues, in uniform bins on (0, max]."""
    bins = bins if bins is not None else settings.FIM_BINS
    positive = eigenvalues[eigenvalues > POSITIVE_TOL]
    if positive.size == 0:
        return None, None
    counts, edges = np.histogram(positive, bins=bins, range=(0.0, float(positive.max())))
    return counts / positive.size, edges


def fim_from_scores(scores: np.ndarray, bins: int | None = None, label: str = "") -> FimSpectrum:
    """F = (1/N) sum_i g_i g_i^T from per-sample score rows ``(N, P)``."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] == 0:
        raise FimError(f"scores must be a non-empty (N, P) matrix, got shape {scores.shape}")
    if not np.all(np.isfinite(scores)):
        raise FimError("scores contain non-finite entries")
    n = scores.shape[0]
    matrix = scores.T @ scores / n
    matrix = 0.5 * (matrix + matrix.T)
    eigenvalues = linalg.eigh(matrix, eigvals_only=True)
    if eigenvalues.size and eigenvalues[0] < -PSD_TOL:
        raise FimError(f"Fisher matrix is not positive semi-definite (min eigenvalue {eigenvalues[0]:.3e})")
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    density, edges = eigen_density(eigenvalues, bins)
    if density is None:
        logger.warning("Fisher spectrum %s has no positive eigenvalue; density omitted", label or "")
    return FimSpectrum(matrix, eigenvalues, density, edges, n, label)


def _parameters(model: HybridModel, scope: str) -> list[torch.nn.Parameter]:
    """Quantum thetas first, then the head, then the frontend."""
    quantum = [node.theta for node in model.nodes]
    if scope == "quantum":
        if not quantum:
            raise FimError("model has no quantum parameters")
        return quantum
    if scope != "all":
        raise FimError(f"unknown scope {scope!r}")
    rest = list(model.head.parameters())
    if model.frontend is not None:
        rest += list(model.frontend.parameters())
    return quantum + rest


def _log_likelihood(model: HybridModel, out: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    if model.task == "classification":
        return torch.log(out[0, target].clamp_min(PROB_FLOOR))
    return -0.5 * torch.sum((out - target) ** 2)


def empirical_fim(
    model: HybridModel,
    dataset: Dataset,
    backend: AnyBackend | None = None,
    *,
    scope: str = "all",
    max_params: int = 100,
    max_samples: int | None = None,
    bins: int | None = None,
    label: str = "",
) -> FimSpectrum:
    """Outer-product Fisher from per-sample gradients of ln p(label | x)."""
    if dataset.n_samples == 0:
        raise FimError("dataset is empty")
    if backend is not None:
        model.set_backend(backend)
    params = _parameters(model, scope)
    rows = dataset.n_samples if max_samples is None else min(max_samples, dataset.n_samples)
    x = torch.as_tensor(dataset.features[:rows], dtype=DTYPE)
    labels = dataset.labels[:rows]

    was_training = model.training
    model.eval()
    scores = []
    try:
        for i in range(rows):
            target = torch.as_tensor(labels[i], dtype=torch.long if model.task == "classification" else DTYPE)
            out = model(x[i : i + 1])
            grads = torch.autograd.grad(_log_likelihood(model, out, target), params, allow_unused=True)
            parts = [g if g is not None else torch.zeros_like(p) for g, p in zip(grads, params, strict=True)]
            flat = torch.cat([part.reshape(-1) for part in parts])
            scores.append(flat[:max_params].detach().numpy())
    finally:
        model.train(was_training)
    logger.debug("Fisher scores: %d samples x %d parameters", rows, len(scores[0]))
    return fim_from_scores(np.stack(scores), bins, label)


# ---------------------------------------------------------------------------
# Reports and tables
# ---------------------------------------------------------------------------


@dataclass
class SpectrumReport:
    spectra: list[FimSpectrum] = field(default_factory=list)

    def summary(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "model": s.label,
                    "n_params": s.n_params,
                    "n_samples": s.n_samples,
                    "max_eigenvalue": s.max_eigenvalue,
                    "n_positive": int(s.positive.size),
                    "density_omitted": s.density is None,
                }
                for s in self.spectra
            ],
            columns=["model", "n_params", "n_samples", "max_eigenvalue", "n_positive", "density_omitted"],
        )

    def densities(self) -> pd.DataFrame:
        frames = [spectrum_table(s) for s in self.spectra if s.density is not None]
        if not frames:
            return pd.DataFrame(columns=["model", "lambda", "density"])
        return pd.concat(frames, ignore_index=True)


def spectrum_compare(classical_fim: FimSpectrum, hybrid_fim: FimSpectrum) -> SpectrumReport:
    """Side-by-side spectra; magnitudes are reported, never judged."""
    return SpectrumReport([classical_fim, hybrid_fim])


def spectrum_table(spectrum: FimSpectrum) -> pd.DataFrame:
    centres = spectrum.bin_centres()
    if centres is None:
        return pd.DataFrame(columns=["model", "lambda", "density"])
    return pd.DataFrame({"model": spectrum.label, "lambda": centres, "density": spectrum.density})


def heatmap_table(spectrum: FimSpectrum) -> pd.DataFrame:
    return pd.DataFrame(spectrum.matrix, columns=[f"p{j}" for j in range(spectrum.n_params)])


def load_heatmap(path: Path | str) -> np.ndarray:
    matrix = read_table(path).to_numpy(dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise FimError(f"{path}: heatmap must be square, got {matrix.shape}")
    if not np.allclose(matrix, matrix.T, atol=SYMMETRY_TOL, rtol=0.0):
        raise FimError(f"{path}: heatmap is not symmetric")
    return matrix
