"""Dataset generators: moon, spiral, circles, NARMA; feature normalisation."""
from app.modules.data.schemas import DatasetSpec
from app.modules.data.services import (
    MOON_MIDPOINTS,
    NARMA_ALPHA,
    Dataset,
    DatasetError,
    NarmaDivergenceError,
    NarmaSeries,
    NoisyTarget,
    add_outliers,
    gen_circles,
    gen_moon,
    gen_narma,
    gen_spiral,
    load_dataset,
    load_series,
    make_dataset,
    narma_windows,
    noisy_target,
    normalize_columns,
    normalize_features,
    save_dataset,
    save_series,
)

__all__ = [
    "MOON_MIDPOINTS",
    "NARMA_ALPHA",
    "Dataset",
    "DatasetError",
    "DatasetSpec",
    "NarmaDivergenceError",
    "NarmaSeries",
    "NoisyTarget",
    "add_outliers",
    "gen_circles",
    "gen_moon",
    "gen_narma",
    "gen_spiral",
    "load_dataset",
    "load_series",
    "make_dataset",
    "narma_windows",
    "noisy_target",
    "normalize_columns",
    "normalize_features",
    "save_dataset",
    "save_series",
]
