"""Empirical Fisher information: matrix, spectrum density and exports."""
import argparse

from app.modules.analysis.commands import register_commands
from app.modules.analysis.schemas import FimConfig
from app.modules.analysis.services import (
    FimError,
    FimSpectrum,
    SpectrumReport,
    eigen_density,
    empirical_fim,
    fim_from_scores,
    heatmap_table,
    load_heatmap,
    spectrum_compare,
    spectrum_table,
)

MODULE_META = {
    "id": "analysis",
    "name": "Fisher analysis",
    "description": "Empirical Fisher information heatmaps and eigenvalue spectra",
    "commands": {"fim": FimConfig},
}


def register(subparsers: argparse._SubParsersAction) -> None:
    register_commands(subparsers)


__all__ = [
    "FimConfig",
    "FimError",
    "FimSpectrum",
    "SpectrumReport",
    "eigen_density",
    "empirical_fim",
    "fim_from_scores",
    "heatmap_table",
    "load_heatmap",
    "spectrum_compare",
    "spectrum_table",
]
