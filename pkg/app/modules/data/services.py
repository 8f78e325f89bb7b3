"""Dataset generators and feature normalisation.

Every generator is a pure function of its arguments and seed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from sklearn.datasets import make_circles, make_moons
from sklearn.utils import check_random_state

from app.core.artifacts import FLOAT_FORMAT
from app.modules.data.schemas import DatasetSpec

logger = logging.getLogger(__name__)


class DatasetError(ValueError):
    """Raised when a dataset cannot be generated or loaded."""


class NarmaDivergenceError(DatasetError):
    """The NARMA recurrence left its bounded regime."""

    def __init__(self, order: int, seed: int | None, step: int, value: float) -> None:
        super().__init__(f"NARMA{order} diverged at step {step} (y={value:.4g}, seed={seed})")
        self.order = order
        self.seed = seed
        self.step = step


# ---------------------------------------------------------------------------
# Classification sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """Rows of features with class labels; ``n_classes == 0`` marks a regression target."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2:
            raise DatasetError(f"features must be a matrix, got shape {features.shape}")
        labels = np.asarray(self.labels)
        if labels.shape[0] != features.shape[0]:
            raise DatasetError(f"{features.shape[0]} feature rows but {labels.shape[0]} labels")
        if self.n_classes > 0:
            labels = labels.astype(np.int64)
            if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
                raise DatasetError(f"labels must lie in [0, {self.n_classes})")
        else:
            labels = labels.astype(np.float64)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_dims(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


def _check_even(n: int) -> None:
    if n < 2 or n % 2:
        raise DatasetError(f"n must be a positive even count, got {n}")


def gen_moon(
    n: int = 600,
    noise_sd: float = 0.1,
    seed: int = 0,
    *,
    shuffle: bool = True,
    outliers: int = 0,
) -> Dataset:
    """Two interlocking half circles, ``n // 2`` points each."""
    _check_even(n)
    x, y = make_moons(n_samples=n, noise=noise_sd if noise_sd > 0 else None, shuffle=shuffle, random_state=seed)
    ds = Dataset(x, y, 2, {"name": "moon", "seed": seed, "noise_sd": noise_sd, "shuffle": shuffle})
    return add_outliers(ds, outliers) if outliers else ds


# Midpoints of the upper (class 0) and lower (class 1) moon arcs.
MOON_MIDPOINTS = ((0.0, 1.0), (1.0, -0.5))


def add_outliers(dataset: Dataset, k: int) -> Dataset:
    """Append ``k`` points at the arc midpoints carrying the other arc's label."""
    if k < 0:
        raise DatasetError(f"outlier count must be >= 0, got {k}")
    if dataset.n_classes != 2 or dataset.n_dims != 2:
        raise DatasetError("outliers apply to two-class planar datasets")
    points = np.array([MOON_MIDPOINTS[i % 2] for i in range(k)]).reshape(k, 2)
    labels = np.array([1 - (i % 2) for i in range(k)], dtype=np.int64)
    meta = {**dataset.meta, "outliers": k}
    return Dataset(
        np.vstack([dataset.features, points]),
        np.concatenate([dataset.labels, labels]),
        dataset.n_classes,
        meta,
    )


def gen_spiral(
    n: int = 600,
    turns: float = 1.5,
    seed: int = 0,
    *,
    noise_sd: float = 0.0,
    shuffle: bool = True,
) -> Dataset:
    """Two interleaved Archimedean arms; arm ``k`` is arm 0 rotated by ``k * pi``."""
    _check_even(n)
    if turns <= 0:
        raise DatasetError(f"turns must be > 0, got {turns}")
    rng = check_random_state(seed)
    m = n // 2
    t = (np.arange(m) + 1.0) / m
    angle = 2.0 * math.pi * turns * t
    arm = np.column_stack([t * np.cos(angle), t * np.sin(angle)])
    x = np.vstack([arm, -arm])
    y = np.repeat([0, 1], m)
    if noise_sd > 0:
        x = x + rng.normal(scale=noise_sd, size=x.shape)
    if shuffle:
        order = rng.permutation(n)
        x, y = x[order], y[order]
    return Dataset(x, y, 2, {"name": "spiral", "seed": seed, "turns": turns, "noise_sd": noise_sd})


def gen_circles(
    n: int = 600,
    noise_sd: float = 0.05,
    seed: int = 0,
    *,
    factor: float = 0.5,
    shuffle: bool = True,
) -> Dataset:
    """Concentric circles; the transfer-learning source task."""
    _check_even(n)
    x, y = make_circles(
        n_samples=n, noise=noise_sd if noise_sd > 0 else None, factor=factor, shuffle=shuffle, random_state=seed
    )
    return Dataset(x, y, 2, {"name": "circles", "seed": seed, "noise_sd": noise_sd, "factor": factor})


def make_dataset(spec: DatasetSpec) -> Dataset:
    if spec.name == "moon":
        return gen_moon(spec.n, spec.noise_sd, spec.seed, shuffle=spec.shuffle, outliers=spec.outliers)
    if spec.name == "spiral":
        return gen_spiral(spec.n, spec.turns, spec.seed, noise_sd=spec.noise_sd, shuffle=spec.shuffle)
    return gen_circles(spec.n, spec.noise_sd, spec.seed, factor=spec.factor, shuffle=spec.shuffle)


# ---------------------------------------------------------------------------
# NARMA
# ---------------------------------------------------------------------------

NARMA_ALPHA = {5: 0.1, 10: 0.2}
NARMA_DIVERGENCE = 10.0
NOISE_DECAY_EPOCHS = 50.0


@dataclass(frozen=True)
class NarmaSeries:
    order: int
    u: np.ndarray
    y: np.ndarray
    alpha: float
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.u)


def gen_narma(
    order: int,
    length: int,
    seed: int | None = 0,
    *,
    alpha: float | None = None,
    u: np.ndarray | None = None,
) -> NarmaSeries:
    """y(t+1) = 0.3 y(t) + 0.05 y(t) sum_{i<order} y(t-i) + 1.5 u(t-order+1) u(t) + 0.1.

    History before t=0 is zero. ``u`` defaults to Uniform[0, 0.5] draws.
    """
    if order not in NARMA_ALPHA:
        raise DatasetError(f"NARMA order must be 5 or 10, got {order}")
    if length <= order:
        raise DatasetError(f"series length {length} must exceed the order {order}")
    if u is None:
        u = check_random_state(seed).uniform(0.0, 0.5, size=length)
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if u.shape[0] != length:
        raise DatasetError(f"input series has length {u.shape[0]}, expected {length}")

    y = np.zeros(length)
    for t in range(length - 1):
        window = y[max(0, t - order + 1) : t + 1].sum()
        lagged = u[t - order + 1] if t >= order - 1 else 0.0
        y[t + 1] = 0.3 * y[t] + 0.05 * y[t] * window + 1.5 * lagged * u[t] + 0.1
        if not abs(y[t + 1]) <= NARMA_DIVERGENCE:
            raise NarmaDivergenceError(order, seed, t + 1, float(y[t + 1]))
    return NarmaSeries(order, u, y, NARMA_ALPHA[order] if alpha is None else float(alpha), seed)


@dataclass(frozen=True)
class NoisyTarget:
    values: np.ndarray
    eta: float
    sigma: float


def noisy_target(
    series: NarmaSeries | np.ndarray, epoch: int, seed: int = 0, *, alpha: float | None = None
) -> NoisyTarget:
    """y(t) + eta * eps(t) with eta = alpha * exp(-epoch / 50), eps ~ N(0, 1)."""
    if epoch < 0:
        raise DatasetError(f"epoch must be >= 0, got {epoch}")
    if isinstance(series, NarmaSeries):
        y = series.y
        alpha = series.alpha if alpha is None else alpha
    else:
        y = np.asarray(series, dtype=np.float64)
        if alpha is None:
            raise DatasetError("alpha is required for a bare target array")
    eta = float(alpha) * math.exp(-epoch / NOISE_DECAY_EPOCHS)
    eps = np.random.default_rng([seed, epoch]).standard_normal(y.shape)
    noise = eta * eps
    return NoisyTarget(y + noise, eta, float(np.std(noise)))


def narma_windows(series: NarmaSeries, lags: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Rows of ``lags`` consecutive inputs and the output one step after the window."""
    lags = series.order if lags is None else lags
    if not 1 <= lags < len(series):
        raise DatasetError(f"lags must be in [1, {len(series)}), got {lags}")
    rows = len(series) - lags
    inputs = np.lib.stride_tricks.sliding_window_view(series.u, lags)[:rows].copy()
    targets = series.y[lags:].copy()
    return inputs, targets


# ---------------------------------------------------------------------------
# Normalisation
# ---------------------------------------------------------------------------


def normalize_features(x: Any, target: tuple[float, float] = (0.0, math.pi)) -> np.ndarray:
    """Min-max map onto ``target``; a constant input maps to the midpoint."""
    lo, hi = float(target[0]), float(target[1])
    if not hi > lo:
        raise DatasetError(f"target range must be increasing, got {target}")
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    if not np.all(np.isfinite(x)):
        raise DatasetError("features must be finite")
    low, high = float(x.min()), float(x.max())
    if high == low:
        return np.full_like(x, 0.5 * (lo + hi))
    scaled = lo + (x - low) / (high - low) * (hi - lo)
    return np.clip(scaled, lo, hi)


def normalize_columns(
    matrix: Any, ranges: tuple[float, float] | list[tuple[float, float]] = (0.0, math.pi)
) -> np.ndarray:
    """``normalize_features`` per column with full-dataset statistics."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise DatasetError(f"expected a matrix, got shape {matrix.shape}")
    if isinstance(ranges, tuple):
        ranges = [ranges] * matrix.shape[1]
    if len(ranges) != matrix.shape[1]:
        raise DatasetError(f"{len(ranges)} ranges for {matrix.shape[1]} columns")
    return np.column_stack([normalize_features(matrix[:, j], r) for j, r in enumerate(ranges)])


# ---------------------------------------------------------------------------
# Delimited-text import / export
# ---------------------------------------------------------------------------


def save_dataset(dataset: Dataset, path: Path | str) -> Path:
    path = Path(path)
    frame = pd.DataFrame(dataset.features, columns=[f"x{j}" for j in range(dataset.n_dims)])
    frame["label"] = dataset.labels
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("Wrote dataset %s (%d rows)", path, len(frame))
    return path


def load_dataset(path: Path | str, n_classes: int | None = None) -> Dataset:
    """Read a table written by ``save_dataset``; ``n_classes`` defaults to max label + 1."""
    frame = pd.read_csv(path, comment="#")
    if "label" not in frame.columns:
        raise DatasetError(f"{path}: missing 'label' column")
    features = frame.drop(columns=["label"]).to_numpy(dtype=np.float64)
    labels = frame["label"].to_numpy()
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if len(labels) else 0
    return Dataset(features, labels, n_classes, {"name": Path(path).stem})


def save_series(series: NarmaSeries, path: Path | str) -> Path:
    path = Path(path)
    frame = pd.DataFrame({"u": series.u, "y": series.y})
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def load_series(path: Path | str, order: int, *, alpha: float | None = None) -> NarmaSeries:
    frame = pd.read_csv(path, comment="#")
    missing = {"u", "y"} - set(frame.columns)
    if missing:
        raise DatasetError(f"{path}: missing columns {sorted(missing)}")
    if order not in NARMA_ALPHA:
        raise DatasetError(f"NARMA order must be 5 or 10, got {order}")
    return NarmaSeries(
        order,
        frame["u"].to_numpy(dtype=np.float64),
        frame["y"].to_numpy(dtype=np.float64),
        NARMA_ALPHA[order] if alpha is None else alpha,
    )
