"""Structure-preserving solver for chemotaxis PDEs with singular sensitivity.

A finite-difference predictor-corrector framework on periodic grids: implicit
Crank-Nicolson diffusion with explicit two-step extrapolation of drift and
reactions, followed by constrained projections that keep agent densities
nonnegative (and, for the multi-compartment epidemic system, conserve the
total population exactly).  Applications: crime hotspot pattern formation and
spatial epidemic dynamics.
"""

from . import crime, epidemic, grid, harness, linsolve, projection
from .errors import (ChemotaxError, ConfigError, Diverged, DomainError,
                     Infeasible, InvariantViolation, NewtonStall,
                     NoConvergence, NonNestedGrids, SingularSystem,
                     SpecMismatch)
from .grid import FaceField, GridSpec
from .linsolve import KrylovConfig, SpectralPlan
from .projection import ProjectionOutcome

__version__ = "0.1.0"

__all__ = [
    "ChemotaxError", "ConfigError", "Diverged", "DomainError", "FaceField",
    "GridSpec", "Infeasible", "InvariantViolation", "KrylovConfig",
    "NewtonStall", "NoConvergence", "NonNestedGrids", "ProjectionOutcome",
    "SingularSystem", "SpecMismatch", "SpectralPlan", "crime", "epidemic",
    "grid", "harness", "linsolve", "projection",
]
