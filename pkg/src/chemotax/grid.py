"""Discrete calculus on a uniform periodic grid.

Scalar fields are plain float arrays of shape ``(..., n, n)``; axis ``-2``
indexes x and axis ``-1`` indexes y, both wrapping periodically.  Leading axes
(e.g. a stack of compartment densities) broadcast through every operator.
Geometry lives in :class:`GridSpec`; operators take the spacing ``h``
explicitly so they stay cheap, stateless functions.

The staggered layout follows the usual marker-and-cell convention:
a :class:`FaceField` stores x-face values at ``(i+1/2, j)`` in ``x[i, j]`` and
y-face values at ``(i, j+1/2)`` in ``y[i, j]``.  Forward differences map nodes
to faces, backward differences map faces back to nodes, so that
``divergence(gradient(u)) == laplacian(u)`` and the summation-by-parts
identity ``<grad u, grad v> = -<lap u, v>`` holds exactly in floating point
up to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, SpecMismatch


@dataclass(frozen=True)
class GridSpec:
    """Uniform n-by-n periodic grid on a square domain.

    Nodes sit at ``x_i = xmin + i*h`` for ``i = 0..n-1`` with
    ``h = (xmax - xmin)/n``; the point at ``xmax`` is identified with the one
    at ``xmin``.  Grids refined by an integer factor therefore share nodes,
    which convergence studies rely on.
    """

    n: int
    xmin: float = 0.0
    xmax: float = 1.0

    def __post_init__(self):
        if self.n < 4:
            raise ValueError(f"need at least 4 points per axis, got {self.n}")
        if not self.xmax > self.xmin:
            raise ValueError("domain must have positive extent")

    @property
    def h(self) -> float:
        return (self.xmax - self.xmin) / self.n

    @property
    def extent(self) -> float:
        return self.xmax - self.xmin

    def nodes(self) -> np.ndarray:
        return self.xmin + self.h * np.arange(self.n)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates as (X, Y) arrays of shape (n, n), ij-indexed."""
        x = self.nodes()
        return np.meshgrid(x, x, indexing="ij")

    def sample(self, f) -> np.ndarray:
        """Evaluate ``f(x, y)`` on the grid nodes."""
        xx, yy = self.meshgrid()
        return np.asarray(f(xx, yy), dtype=float)


class FaceField(NamedTuple):
    """Face-centered value pair: ``x[i, j]`` at (i+1/2, j), ``y[i, j]`` at (i, j+1/2)."""

    x: np.ndarray
    y: np.ndarray


# -- shifts ------------------------------------------------------------------
# np.roll(u, -1, axis) brings u_{i+1} to slot i; +1 brings u_{i-1}.

def _xp(u):
    return np.roll(u, -1, axis=-2)


def _xm(u):
    return np.roll(u, 1, axis=-2)


def _yp(u):
    return np.roll(u, -1, axis=-1)


def _ym(u):
    return np.roll(u, 1, axis=-1)


# -- operators ---------------------------------------------------------------

def laplacian(u: np.ndarray, h: float) -> np.ndarray:
    """Standard five-point Laplacian with periodic wrap."""
    return (_xp(u) + _xm(u) + _yp(u) + _ym(u) - 4.0 * u) / (h * h)


def gradient(u: np.ndarray, h: float) -> FaceField:
    """Forward-difference gradient, node values to face values."""
    return FaceField((_xp(u) - u) / h, (_yp(u) - u) / h)


def divergence(f: FaceField, h: float) -> np.ndarray:
    """Backward-difference divergence, face values to node values.

    Under periodic wrap every face value enters twice with opposite sign, so
    the result telescopes to zero total mass.
    """
    return (f.x - _xm(f.x)) / h + (f.y - _ym(f.y)) / h


def face_average(u: np.ndarray) -> FaceField:
    """Arithmetic mean of the two nodes adjacent to each face."""
    return FaceField(0.5 * (_xp(u) + u), 0.5 * (_yp(u) + u))


def div_scaled_gradient(coeff: FaceField, u: np.ndarray, h: float) -> np.ndarray:
    """div(coeff * grad u) with a face-centered scalar coefficient."""
    g = gradient(u, h)
    return divergence(FaceField(coeff.x * g.x, coeff.y * g.y), h)


def chemotaxis_divergence(phi: np.ndarray, p: np.ndarray, p0,
                          h: float) -> np.ndarray:
    """Divergence of the singular-sensitivity drift flux.

    Returns ``div( avg(phi/(p+p0)) * grad(p+p0) )``, the building block of the
    up-gradient drift of agents toward high attractiveness.  The mobility
    ratio ``phi/(p+p0)`` is formed at the nodes first and then averaged onto
    the faces, which keeps the coefficient bounded as long as the nodal
    ``p + p0`` stays positive.

    ``phi`` may carry leading stack axes; ``p`` and ``p0`` (scalar or field)
    are shared by every component.

    Raises:
        DomainError: if ``p + p0 <= 0`` anywhere.  Positivity of ``p`` is the
            corrector's job; a violation here means it was skipped or failed.
    """
    a = p + p0
    if np.min(a) <= 0.0:
        raise DomainError(f"p + p0 reached {np.min(a):.3e} <= 0; "
                          "the singular mobility is undefined")
    coeff = face_average(phi / a)
    grad_a = gradient(a, h)
    return divergence(FaceField(coeff.x * grad_a.x, coeff.y * grad_a.y), h)


def log_chemotaxis_divergence(phi: np.ndarray, p: np.ndarray, p0,
                              h: float) -> np.ndarray:
    """Log-gradient variant of the drift flux divergence.

    Returns ``div( avg(phi) * grad(log(p+p0)) )``: the density is averaged
    onto the faces and the drift follows the difference quotient of
    ``log(p + p0)`` directly.  Agrees with :func:`chemotaxis_divergence` to
    second order on smooth data but is far more sensitive when ``p + p0``
    nears zero, which makes it the sharper stress test of the positivity
    correction (uncorrected runs break down where the ratio form coasts).

    Raises:
        DomainError: if ``p + p0 <= 0`` anywhere.
    """
    a = p + p0
    if np.min(a) <= 0.0:
        raise DomainError(f"p + p0 reached {np.min(a):.3e} <= 0; "
                          "log sensitivity is undefined")
    coeff = face_average(phi)
    grad_log = gradient(np.log(a), h)
    return divergence(FaceField(coeff.x * grad_log.x,
                                coeff.y * grad_log.y), h)


# -- inner products and norms --------------------------------------------------
# The quadrature weight is h^2 per node; multi-component fields sum over their
# leading axes as well, matching the Euclidean combination of component norms.

def inner_product(u: np.ndarray, v: np.ndarray, h: float) -> float:
    if np.shape(u) != np.shape(v):
        raise SpecMismatch(f"shape {np.shape(u)} vs {np.shape(v)}")
    return h * h * float(np.sum(u * v))


def l2_norm(u: np.ndarray, h: float) -> float:
    return h * float(np.sqrt(np.sum(np.square(u))))


def h1_norm(u: np.ndarray, h: float) -> float:
    g = gradient(u, h)
    s = np.sum(np.square(u)) + np.sum(np.square(g.x)) + np.sum(np.square(g.y))
    return h * float(np.sqrt(s))


def linf_norm(u: np.ndarray) -> float:
    return float(np.max(np.abs(u)))


def lp_norm(u: np.ndarray, p: float, h: float) -> float:
    if p == np.inf:
        return linf_norm(u)
    return float((h * h * np.sum(np.abs(u) ** p)) ** (1.0 / p))


def total_mass(u: np.ndarray, h: float) -> float:
    """h^2 * sum over every entry (all components for stacked fields)."""
    return h * h * float(np.sum(u))
