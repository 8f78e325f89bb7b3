"""Environment-driven settings for the QPIE circuit engine."""
from __future__ import annotations

import os
from pathlib import Path


def _bool(name: str, default: bool = False) -> bool:
    return os.getenv(name, "true" if default else "false").strip().lower() in {"1", "true", "yes", "on"}


def _int(name: str, default: int) -> int:
    try:
        return int(os.getenv(name, str(default)))
    except ValueError:
        return default


def _float(name: str, default: float) -> float:
    try:
        return float(os.getenv(name, repr(default)))
    except ValueError:
        return default


class Settings:
    """Engine settings. Defaults reproduce the documented experiment setup."""

    PROJECT_NAME: str = "QPIE Circuit Engine"
    VERSION: str = "0.1.0"

    DEBUG: bool = _bool("QPIE_DEBUG", default=False)

    # Statevector memory is 16 * 2**n bytes; the density matrix is 16 * 4**n.
    MAX_QUBITS: int = _int("QPIE_MAX_QUBITS", 24)
    MAX_DM_QUBITS: int = _int("QPIE_MAX_DM_QUBITS", 12)

    # ||U^dagger U - I||_inf bound checked when a gate matrix is built.
    UNITARY_TOL: float = _float("QPIE_UNITARY_TOL", 1e-10)

    # Rotation-pool thresholds tau_1 < tau_2.
    TAU_LOW: float = _float("QPIE_TAU_LOW", 1.0 / 3.0)
    TAU_HIGH: float = _float("QPIE_TAU_HIGH", 2.0 / 3.0)

    FD_STEP: float = _float("QPIE_FD_STEP", 1e-5)
    FIM_BINS: int = _int("QPIE_FIM_BINS", 50)

    BASE_DIR: Path = Path(__file__).resolve().parents[2]
    OUTPUT_DIR: Path = (BASE_DIR / os.getenv("QPIE_OUTPUT_DIR", "data/outputs")).resolve()

    MAX_CONFIG_KB: int = _int("QPIE_MAX_CONFIG_KB", 256)
    MAX_CONFIG_BYTES: int = MAX_CONFIG_KB * 1024
    ALLOWED_CONFIG_EXTENSIONS: set[str] = {".json"}


settings = Settings()
