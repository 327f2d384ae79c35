"""Exception types shared across the package."""


class ChemotaxError(Exception):
    """Base class for all package errors."""


class SpecMismatch(ChemotaxError):
    """Fields passed to a binary operation live on different grids."""


class DomainError(ChemotaxError):
    """The attractiveness field left the admissible region (p + p0 <= 0
    somewhere), so the singular mobility ratio is undefined.  Usually means
    the positivity correction was skipped or failed upstream."""


class SingularSystem(ChemotaxError):
    """A modal divisor of a spectral solve is exactly zero."""


class NoConvergence(ChemotaxError):
    """An iterative linear solve ran out of iterations."""

    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"no convergence after {iterations} iterations, "
                         f"relative residual {residual:.3e}")


class NewtonStall(ChemotaxError):
    """A semi-smooth Newton iteration hit its iteration budget."""

    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"Newton stalled after {iterations} iterations, "
                         f"residual {residual:.3e}")


class Infeasible(ChemotaxError):
    """A constrained projection has no feasible point (bad target mass)."""


class Diverged(ChemotaxError):
    """An uncorrected run blew up: non-finite values or a norm above the
    divergence threshold."""

    def __init__(self, time, norm):
        self.time = time
        self.norm = norm
        super().__init__(f"solution diverged at t={time:g} (max norm {norm:.3e})")


class NonNestedGrids(ChemotaxError):
    """A convergence study asked for an error against a reference grid whose
    nodes do not contain the coarse nodes."""


class InvariantViolation(ChemotaxError):
    """A run-time audit (positivity, mass conservation, multiplier sign or
    iteration budget) failed during a harness run."""


class ConfigError(ChemotaxError):
    """Malformed configuration file or unknown key."""
