"""Experiment harness: perturbations, convergence studies, drivers, export."""

from .config import ExperimentConfig, build_config, default_sections, parse_config_file
from .convergence import ConvergenceRow, ConvergenceTable, run_convergence
from .drivers import (CellResult, epidemic_initial_fields, run_crime,
                      run_crime_cell, run_epidemic, run_epidemic_cell)
from .io import export_csv, export_heatmap, read_csv, read_heatmap
from .perturb import gaussian_perturbation

__all__ = [
    "CellResult", "ConvergenceRow", "ConvergenceTable", "ExperimentConfig",
    "build_config", "default_sections", "epidemic_initial_fields",
    "export_csv", "export_heatmap", "gaussian_perturbation",
    "parse_config_file", "read_csv", "read_heatmap", "run_convergence",
    "run_crime", "run_crime_cell", "run_epidemic", "run_epidemic_cell",
]
