"""Linear solves behind the implicit half of the time stepper.

Two kinds of systems appear:

* shifted Laplacians ``(alpha*I - beta*Lap) u = rhs`` from the Crank-Nicolson
  diffusion update.  Under periodic boundaries the five-point Laplacian is
  diagonal in Fourier space, so these are solved exactly (to roundoff) with a
  pair of real FFTs.
* the masked operator ``(I - Lap o diag(mask)) V = rhs`` from the generalized
  Jacobian of the semi-smooth Newton corrector.  The mask is the active-set
  indicator, the operator is nonsymmetric, and ``(I - Lap)^{-1}`` works as a
  strong preconditioner because the preconditioned spectrum sits in (0, 1].
  We run preconditioned GMRES on it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import NoConvergence, SingularSystem
from .grid import GridSpec, laplacian


@dataclass(frozen=True)
class KrylovConfig:
    """Stopping rule for the masked-Jacobian solve.

    The defaults keep the projection error orders of magnitude below the
    scheme's truncation error.
    """

    tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


class SpectralPlan:
    """Reusable Fourier diagonalization of the periodic Laplacian.

    ``eigenvalues[k, l] = -(4/h^2) (sin^2(pi k / n) + sin^2(pi l / n))``;
    the (0, 0) mode is zero and every other mode is strictly negative.  The
    plan stores the eigenvalue table in the half-spectrum layout of ``rfft2``
    and is immutable, so one plan can be shared by concurrent solves.
    """

    def __init__(self, spec: GridSpec):
        self.spec = spec
        n, h = spec.n, spec.h
        k = np.arange(n)
        l = np.arange(n // 2 + 1)
        sk = np.sin(np.pi * k / n) ** 2
        sl = np.sin(np.pi * l / n) ** 2
        self.eigenvalues = -(4.0 / (h * h)) * (sk[:, None] + sl[None, :])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.spec.n, self.spec.n)


def solve_shifted_laplacian(alpha: float, beta: float, rhs: np.ndarray,
                            plan: SpectralPlan) -> np.ndarray:
    """Solve ``(alpha*I - beta*Lap) u = rhs`` exactly in Fourier space.

    ``rhs`` may carry leading stack axes.  For ``alpha > 0`` and ``beta >= 0``
    every modal divisor ``alpha - beta*eig`` is positive, since the
    eigenvalues are nonpositive.

    Raises:
        SingularSystem: if some modal divisor is exactly zero (e.g.
            ``alpha = 0``, which kills the constant mode).
    """
    denom = alpha - beta * plan.eigenvalues
    if np.any(denom == 0.0):
        raise SingularSystem(f"alpha={alpha}, beta={beta} zeroes a Fourier mode")
    n = plan.spec.n
    u_hat = np.fft.rfft2(rhs, axes=(-2, -1)) / denom
    return np.fft.irfft2(u_hat, s=(n, n), axes=(-2, -1))


def solve_masked_jacobian(mask: np.ndarray, rhs: np.ndarray,
                          plan: SpectralPlan,
                          cfg: KrylovConfig = KrylovConfig()
                          ) -> tuple[np.ndarray, int]:
    """Solve ``(I - Lap o diag(mask)) V = rhs`` with preconditioned GMRES.

    ``mask`` is a 0/1 active-set indicator.  Returns the solution and the
    number of Krylov iterations; an all-zero mask short-circuits to
    ``V = rhs`` and an all-ones mask converges in a single iteration because
    the preconditioned operator is then the identity.

    Raises:
        NoConvergence: iteration budget exhausted; the final relative
            residual is attached so the caller can decide what to do.
    """
    h = plan.spec.h
    shape = plan.shape
    size = shape[0] * shape[1]
    if not mask.any():
        return rhs.copy(), 0

    def matvec(v):
        u = v.reshape(shape)
        return (u - laplacian(mask * u, h)).ravel()

    def precond(v):
        return solve_shifted_laplacian(1.0, 1.0, v.reshape(shape), plan).ravel()

    op = LinearOperator((size, size), matvec=matvec, dtype=float)
    pre = LinearOperator((size, size), matvec=precond, dtype=float)

    iters = 0

    def count(_):
        nonlocal iters
        iters += 1

    b = rhs.ravel()
    restart = min(cfg.max_iter, 50)
    # Ask gmres for a slightly tighter preconditioned residual, then verify
    # the true one against cfg.tol.
    v, _ = gmres(op, b, M=pre, rtol=0.1 * cfg.tol, atol=0.0,
                 restart=restart,
                 maxiter=max(1, -(-cfg.max_iter // restart)),
                 callback=count, callback_type="pr_norm")
    # the true residual is authoritative; gmres' own flag tracks the
    # preconditioned one
    resid = float(np.linalg.norm(b - op.matvec(v)) / np.linalg.norm(b))
    if resid > cfg.tol:
        raise NoConvergence(iters, resid)
    return v.reshape(shape), iters
