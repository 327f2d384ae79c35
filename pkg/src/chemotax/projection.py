"""Constrained projections that repair the predictor output.

The predictor is a linear implicit-explicit update and can push field values
slightly negative.  Each corrector below finds the *nearest* admissible state
in an appropriate norm, characterized by Karush-Kuhn-Tucker conditions with
nonnegative Lagrange multipliers and pointwise complementary slackness:

``clip_positive_l2``
    nearest nonnegative field in L2.  Separable, hence a closed-form clip;
    the multiplier is the clipped amount.

``project_h1_positive``
    nearest nonnegative field in H1.  The optimality system
    ``(I - Lap) p = (I - Lap) p_tilde + zeta``, ``zeta >= 0``, ``p >= 0``,
    ``zeta * p = 0`` couples all nodes through the Laplacian.  Writing the
    unknown as a signed split ``U = U+ - U-`` with ``p = U+`` and
    ``zeta = U-`` turns it into one piecewise-smooth equation
    ``F(U) = -Lap U+ + U - (I - Lap) p_tilde = 0`` solved by a semi-smooth
    Newton iteration whose generalized Jacobian is the masked operator from
    :mod:`chemotax.linsolve`.

``project_l2_mass_positive``
    nearest nonnegative compartment stack in L2 subject to a fixed total
    mass.  The KKT system collapses onto the scalar multiplier ``xi`` via the
    cut-off form ``psi = max(psi_tilde - xi, 0)``, and ``xi`` is the root of
    the monotone piecewise-linear residual
    ``F(xi) = h^2 * sum (psi_tilde - xi)^+ - target``.  A scalar semi-smooth
    Newton iteration from ``xi = 0`` finds the root, switching to an exact
    sorted-breakpoint solve if it has not converged within a few updates.

All three are firmly nonexpansive: for any admissible reference ``v``,
``|P(u) - v|^2 + |P(u) - u|^2 <= |u - v|^2`` in the projection norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Infeasible, NewtonStall
from .grid import l2_norm, laplacian
from .linsolve import KrylovConfig, SpectralPlan, solve_masked_jacobian


@dataclass
class ProjectionOutcome:
    """Corrected field(s) plus multipliers and solver diagnostics.

    ``corrected`` has the shape of the input.  ``multiplier_lambda`` is the
    pointwise positivity multiplier (clip and mass projections),
    ``multiplier_xi`` the scalar mass multiplier, ``multiplier_zeta`` the
    pointwise multiplier of the H1 projection.  Unused slots stay ``None`` /
    zero.  ``max_violation_before`` records how negative the input was.
    """

    corrected: np.ndarray
    multiplier_lambda: np.ndarray | None = None
    multiplier_xi: float = 0.0
    multiplier_zeta: np.ndarray | None = None
    newton_iterations: int = 0
    max_violation_before: float = 0.0


def _violation(u: np.ndarray) -> float:
    return float(max(0.0, -np.min(u)))


def clip_positive_l2(u_tilde: np.ndarray) -> ProjectionOutcome:
    """Nearest nonnegative field in L2: pointwise clip at zero.

    The KKT system ``u = u_tilde + lam``, ``lam >= 0``, ``u >= 0``,
    ``lam * u = 0`` holds exactly: where the clip is active ``u = 0`` and
    ``lam = -u_tilde > 0``, elsewhere ``lam = 0``.
    """
    corrected = np.maximum(u_tilde, 0.0)
    lam = corrected - u_tilde
    return ProjectionOutcome(corrected=corrected, multiplier_lambda=lam,
                             max_violation_before=_violation(u_tilde))


def project_h1_positive(p_tilde: np.ndarray, plan: SpectralPlan,
                        cfg: KrylovConfig | None = None,
                        tol: float = 1e-10,
                        max_newton: int = 50) -> ProjectionOutcome:
    """Nearest nonnegative field in H1 via semi-smooth Newton.

    Solves ``F(U) = -Lap U+ + U - (I - Lap) p_tilde = 0`` starting from
    ``U0 = p_tilde``; on exit ``corrected = U+`` and
    ``multiplier_zeta = U-``.  A nonnegative input is already optimal and is
    returned unchanged with zero iterations.  Convergence is declared when
    ``|F|_L2 <= tol * |(I - Lap) p_tilde|_L2``.

    Each Newton step solves the active-set system
    ``(I - Lap o diag(U > 0)) V = -F`` with the spectrally preconditioned
    Krylov solver; the iteration terminates finitely because the residual is
    piecewise linear in ``U``.

    Raises:
        NewtonStall: iteration budget exhausted.
    """
    h = plan.spec.h
    if np.min(p_tilde) >= 0.0:
        return ProjectionOutcome(corrected=p_tilde.copy(),
                                 multiplier_zeta=np.zeros_like(p_tilde))
    if cfg is None:
        cfg = KrylovConfig(tol=min(1e-13, 0.01 * tol), max_iter=400)
    b = p_tilde - laplacian(p_tilde, h)
    scale = l2_norm(b, h)
    if scale == 0.0:
        scale = 1.0
    U = p_tilde.copy()
    for it in range(max_newton):
        u_plus = np.maximum(U, 0.0)
        F = -laplacian(u_plus, h) + U - b
        res = l2_norm(F, h) / scale
        if res <= tol:
            corrected = u_plus
            zeta = np.maximum(-U, 0.0)
            return ProjectionOutcome(corrected=corrected,
                                     multiplier_zeta=zeta,
                                     newton_iterations=it,
                                     max_violation_before=_violation(p_tilde))
        mask = (U > 0.0).astype(float)
        V, _ = solve_masked_jacobian(mask, -F, plan, cfg)
        U = U + V
    u_plus = np.maximum(U, 0.0)
    F = -laplacian(u_plus, h) + U - b
    raise NewtonStall(max_newton, l2_norm(F, h) / scale)


def _mass_residual(psi_tilde: np.ndarray, xi: float, h: float,
                   target: float) -> tuple[float, float]:
    """F(xi) and its generalized derivative (slope of the active piece)."""
    shifted = psi_tilde - xi
    active = shifted > 0.0
    F = h * h * float(np.sum(shifted[active])) - target
    V = -h * h * float(np.count_nonzero(active))
    return F, V


def project_l2_mass_positive(psi_tilde: np.ndarray, target_mass: float,
                             h: float, tol: float = 1e-12,
                             newton_budget: int = 3) -> ProjectionOutcome:
    """Nonnegativity plus total-mass projection of a compartment stack.

    ``psi_tilde`` is an ``(m, n, n)`` stack (all compartments share the one
    scalar multiplier).  The corrected stack is
    ``psi = max(psi_tilde - xi, 0)`` with ``xi`` chosen so that
    ``h^2 * sum(psi) = target_mass``; ``lambda = psi - psi_tilde + xi`` is the
    pointwise multiplier.  ``xi`` may come out negative for standalone inputs
    whose mass is below target; within the coupled stepper the predictor
    conserves mass, so clipping can only add mass and ``xi >= 0``.

    The scalar Newton iteration starts at 0, converges monotonically on the
    convex piecewise-linear residual and typically needs one or two steps;
    ``tol`` bounds ``|F(xi)|`` relative to the target mass.  If Newton has
    not converged within ``newton_budget`` updates (dense clusters of clip
    breakpoints near the root, or a degenerate derivative with no active
    node), the root is instead located exactly on the sorted breakpoints in
    one extra pass, so the reported iteration count never exceeds
    ``newton_budget + 1``.

    Raises:
        Infeasible: nonpositive or non-finite target mass.
    """
    if not np.isfinite(target_mass) or target_mass <= 0.0:
        raise Infeasible(f"target mass {target_mass} is not attainable")
    tol_abs = tol * target_mass
    xi = 0.0
    iterations = 0
    solved = False
    for _ in range(newton_budget):
        F, V = _mass_residual(psi_tilde, xi, h, target_mass)
        if abs(F) <= tol_abs:
            solved = True
            break
        if V == 0.0:
            break  # no active nodes: derivative degenerates
        xi = xi - F / V
        iterations += 1
    if not solved and abs(_mass_residual(psi_tilde, xi, h,
                                         target_mass)[0]) <= tol_abs:
        solved = True
    if not solved:
        xi = _exact_cutoff(psi_tilde, h, target_mass)
        iterations += 1
    corrected = np.maximum(psi_tilde - xi, 0.0)
    lam = corrected - psi_tilde + xi
    return ProjectionOutcome(corrected=corrected, multiplier_lambda=lam,
                             multiplier_xi=xi, newton_iterations=iterations,
                             max_violation_before=_violation(psi_tilde))


def _exact_cutoff(psi_tilde: np.ndarray, h: float, target: float) -> float:
    """Exact root of the piecewise-linear mass residual.

    With the values sorted descending, the piece on which exactly k values
    stay active has residual ``h^2 (S_k - k*xi) - target`` (``S_k`` the
    prefix sum), so the root of the bracketing piece is closed form.  The
    residual decreases in xi, hence increases along the sorted breakpoints,
    and the bracket is found by bisection on that array.
    """
    v = np.sort(psi_tilde.ravel())[::-1]
    m = v.size
    prefix = np.concatenate(([0.0], np.cumsum(v)))
    resid_at = h * h * (prefix[:-1] - np.arange(m) * v) - target
    k = int(np.searchsorted(resid_at, 0.0))
    k = max(min(k, m), 1)   # k == m: root sits below every breakpoint
    return (prefix[k] - target / (h * h)) / k
