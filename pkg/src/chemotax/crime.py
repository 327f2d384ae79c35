"""Predictor-corrector stepper for the two-field singular-sensitivity system.

The continuous model couples an agent density ``phi`` to an attractiveness
field ``p`` over a fixed environmental floor ``p0 > 0``::

    d(phi)/dt = c * div( grad phi - f * phi/(p+p0) * grad(p+p0) ) + r_phi(phi, p)
    d(p)/dt   = eta * D * Lap p                                   + r_p(phi, p)

with chemotactic prefactor ``c`` (= D/4 in the generic form, = D in the crime
variant) and flux factor ``f`` (= 2, i.e. drift up gradients of
``log(p + p0)``).  Two reaction closures are supported:

* generic form:  ``r_phi = -(p+p0) phi``, ``r_p = (p+p0) phi - p``;
* crime form:    ``r_phi = -phi (p+p0) + gamma``,
  ``r_p = -omega p + kappa phi (p+p0)`` where ``phi`` is the criminal density
  and ``p`` the attractiveness above its baseline.

One time step is

1. *predict*: Crank-Nicolson on the linear diffusion (implicit, solved
   spectrally) with second-order Adams-Bashforth extrapolation (weights 3/2,
   -1/2) of the chemotactic flux divergence and the reactions; the very first
   interval uses the one-step variant (explicit Euler on the non-diffusive
   terms), optionally subdivided to keep its first-order local error from
   polluting global second-order accuracy;
2. *correct*: clip ``phi`` at zero (L2 projection) and project ``p`` onto the
   nonnegative cone in H1.

The samples of the explicit terms at the older history level are cached on
the state so each level is evaluated exactly once; the cached values are
bit-identical to a recomputation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from warnings import warn

import numpy as np

from .errors import Diverged, SpecMismatch
from .grid import (GridSpec, chemotaxis_divergence, laplacian, linf_norm,
                   log_chemotaxis_divergence)
from .linsolve import KrylovConfig, SpectralPlan, solve_shifted_laplacian
from .projection import (ProjectionOutcome, clip_positive_l2,
                         project_h1_positive)


@dataclass(frozen=True)
class CrimeReaction:
    """Source/sink rates of the crime closure: replenishment ``gamma``,
    attractiveness decay ``omega``, feedback strength ``kappa``."""

    gamma: float
    omega: float
    kappa: float


@dataclass(frozen=True)
class CrimeParams:
    """Model coefficients.  ``reaction is None`` selects the generic form.

    ``drift`` picks the flux discretization: ``"ratio"`` averages the
    mobility ratio phi/(p+p0) onto the faces, ``"log"`` differences
    log(p+p0) directly.  Both are second-order consistent; the log form is
    markedly less forgiving near p+p0 = 0 (see the blow-up demo).
    """

    D: float
    eta: float
    p0: float | np.ndarray
    chem_prefactor: float
    flux_factor: float = 2.0
    reaction: CrimeReaction | None = None
    drift: str = "ratio"

    def __post_init__(self):
        if not self.D > 0:
            raise ValueError("D must be positive")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not np.min(self.p0) > 0:
            raise ValueError("the environmental floor p0 must be positive")
        if self.drift not in ("ratio", "log"):
            raise ValueError(f"unknown drift form {self.drift!r}")


def general_params(D: float, eta: float, p0,
                   drift: str = "ratio") -> CrimeParams:
    """Generic singular-sensitivity system (chemotactic prefactor D/4)."""
    return CrimeParams(D=D, eta=eta, p0=p0, chem_prefactor=D / 4.0,
                       drift=drift)


def crime_params(D: float, eta: float, a0, gamma: float, omega: float,
                 kappa: float, drift: str = "ratio") -> CrimeParams:
    """Crime-hotspot variant (chemotactic prefactor D)."""
    return CrimeParams(D=D, eta=eta, p0=a0, chem_prefactor=D,
                       reaction=CrimeReaction(gamma, omega, kappa),
                       drift=drift)


def crime_equilibrium(params: CrimeParams) -> tuple[float, float]:
    """Spatially uniform steady state of the crime closure."""
    r = params.reaction
    if r is None:
        raise ValueError("the generic form has no nontrivial equilibrium")
    a0 = float(np.min(params.p0))
    rho = r.gamma * r.omega / (r.kappa * r.gamma + a0 * r.omega)
    a = r.kappa * r.gamma / r.omega
    return rho, a


@dataclass
class CrimeState:
    """Two fields plus the one-step history the two-step predictor needs.

    ``prev`` holds the fields at the previous time level (``None`` before the
    first step).  ``expl_prev`` caches the explicit-term samples at that
    level; it is an optimization only and never changes results.
    """

    spec: GridSpec
    phi: np.ndarray
    p: np.ndarray
    time: float = 0.0
    prev: tuple[np.ndarray, np.ndarray] | None = None
    expl_prev: tuple[np.ndarray, np.ndarray] | None = field(
        default=None, repr=False, compare=False)


def initial_crime_state(spec: GridSpec, phi0: np.ndarray,
                        p0_field: np.ndarray) -> CrimeState:
    if phi0.shape != (spec.n, spec.n) or p0_field.shape != (spec.n, spec.n):
        raise SpecMismatch("initial fields do not match the grid")
    return CrimeState(spec=spec, phi=np.array(phi0, dtype=float),
                      p=np.array(p0_field, dtype=float))


@dataclass
class CrimeStepReport:
    """Projection outcomes of one corrected step."""

    phi: ProjectionOutcome
    p: ProjectionOutcome


def reaction_terms(phi: np.ndarray, p: np.ndarray,
                   params: CrimeParams) -> tuple[np.ndarray, np.ndarray]:
    """Non-diffusive right-hand sides, evaluated pointwise."""
    a = p + params.p0
    if params.reaction is None:
        return -a * phi, a * phi - p
    r = params.reaction
    return -phi * a + r.gamma, -r.omega * p + r.kappa * phi * a


def _explicit_terms(phi, p, params: CrimeParams, h: float):
    """Chemotactic flux divergence plus reactions at one time level."""
    if params.drift == "log":
        chem = log_chemotaxis_divergence(phi, p, params.p0, h)
    else:
        chem = chemotaxis_divergence(phi, p, params.p0, h)
    f_phi, f_p = reaction_terms(phi, p, params)
    coeff = params.chem_prefactor * params.flux_factor
    return -coeff * chem + f_phi, f_p


def _check_plan(state: CrimeState, plan: SpectralPlan):
    if plan.spec != state.spec:
        raise SpecMismatch("spectral plan was built for a different grid")


def predict_first(state: CrimeState, params: CrimeParams, tau: float,
                  plan: SpectralPlan) -> tuple[np.ndarray, np.ndarray]:
    """One-step predictor: Crank-Nicolson diffusion, explicit Euler rest."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    _check_plan(state, plan)
    h = state.spec.h
    e_phi, e_p = _explicit_terms(state.phi, state.p, params, h)
    beta_phi = 0.5 * params.chem_prefactor * tau
    beta_p = 0.5 * params.eta * params.D * tau
    rhs_phi = state.phi + beta_phi * laplacian(state.phi, h) + tau * e_phi
    rhs_p = state.p + beta_p * laplacian(state.p, h) + tau * e_p
    phi_t = solve_shifted_laplacian(1.0, beta_phi, rhs_phi, plan)
    p_t = solve_shifted_laplacian(1.0, beta_p, rhs_p, plan)
    return phi_t, p_t


def _predict_ab2(state: CrimeState, params: CrimeParams, tau: float,
                 plan: SpectralPlan):
    """Two-step predictor; also returns the level-k explicit samples so the
    caller can pass them forward as the next step's history cache."""
    if state.prev is None:
        raise ValueError("two-step predictor needs one-step history")
    if not tau > 0:
        raise ValueError("tau must be positive")
    _check_plan(state, plan)
    h = state.spec.h
    e_k = _explicit_terms(state.phi, state.p, params, h)
    e_km1 = state.expl_prev
    if e_km1 is None:
        e_km1 = _explicit_terms(state.prev[0], state.prev[1], params, h)
    beta_phi = 0.5 * params.chem_prefactor * tau
    beta_p = 0.5 * params.eta * params.D * tau
    rhs_phi = (state.phi + beta_phi * laplacian(state.phi, h)
               + tau * (1.5 * e_k[0] - 0.5 * e_km1[0]))
    rhs_p = (state.p + beta_p * laplacian(state.p, h)
             + tau * (1.5 * e_k[1] - 0.5 * e_km1[1]))
    phi_t = solve_shifted_laplacian(1.0, beta_phi, rhs_phi, plan)
    p_t = solve_shifted_laplacian(1.0, beta_p, rhs_p, plan)
    return phi_t, p_t, e_k


def predict_ab2(state: CrimeState, params: CrimeParams, tau: float,
                plan: SpectralPlan) -> tuple[np.ndarray, np.ndarray]:
    """Two-step predictor: Crank-Nicolson diffusion plus Adams-Bashforth
    extrapolation (3/2, -1/2) of flux and reactions."""
    phi_t, p_t, _ = _predict_ab2(state, params, tau, plan)
    return phi_t, p_t


def _warn_cfl(tau: float, h: float):
    if tau > h:
        warn(f"tau={tau:g} exceeds h={h:g}; second-order accuracy needs "
             "tau bounded by a multiple of h", stacklevel=3)


def step(state: CrimeState, params: CrimeParams, tau: float,
         plan: SpectralPlan, first_substeps: int = 1,
         h1_tol: float = 1e-10, h1_max_newton: int = 50,
         krylov: KrylovConfig | None = None
         ) -> tuple[CrimeState, CrimeStepReport]:
    """Advance one corrected step of size ``tau``.

    Starting from a fresh state (no history) the interval is integrated with
    ``first_substeps`` one-step predictor-corrector substeps, which supplies
    the missing history level; use a substep count well above 1 in
    convergence studies.  Positivity of both fields holds on exit.
    """
    _warn_cfl(tau, state.spec.h)
    if state.prev is None:
        sub = tau / first_substeps
        cur = state
        for _ in range(first_substeps):
            phi_t, p_t = predict_first(cur, params, sub, plan)
            phi_out = clip_positive_l2(phi_t)
            p_out = project_h1_positive(p_t, plan, cfg=krylov, tol=h1_tol,
                                        max_newton=h1_max_newton)
            cur = CrimeState(spec=state.spec, phi=phi_out.corrected,
                             p=p_out.corrected, time=cur.time + sub)
        nxt = replace(cur, time=state.time + tau,
                      prev=(state.phi, state.p), expl_prev=None)
        return nxt, CrimeStepReport(phi=phi_out, p=p_out)

    phi_t, p_t, e_k = _predict_ab2(state, params, tau, plan)
    phi_out = clip_positive_l2(phi_t)
    p_out = project_h1_positive(p_t, plan, cfg=krylov, tol=h1_tol,
                                max_newton=h1_max_newton)
    nxt = CrimeState(spec=state.spec, phi=phi_out.corrected,
                     p=p_out.corrected, time=state.time + tau,
                     prev=(state.phi, state.p), expl_prev=e_k)
    return nxt, CrimeStepReport(phi=phi_out, p=p_out)


def step_uncorrected(state: CrimeState, params: CrimeParams, tau: float,
                     plan: SpectralPlan,
                     blowup_threshold: float = 1e8) -> CrimeState:
    """Advance one raw predictor step, skipping the positivity correction.

    The returned fields may be negative.  Exists to demonstrate what the
    corrector prevents.

    Raises:
        Diverged: non-finite values or max norm above ``blowup_threshold``.
    """
    if state.prev is None:
        phi_t, p_t = predict_first(state, params, tau, plan)
        e_k = None
    else:
        phi_t, p_t, e_k = _predict_ab2(state, params, tau, plan)
    norm = max(linf_norm(phi_t), linf_norm(p_t))
    if not np.isfinite(norm) or norm > blowup_threshold:
        raise Diverged(state.time + tau, norm)
    return CrimeState(spec=state.spec, phi=phi_t, p=p_t,
                      time=state.time + tau, prev=(state.phi, state.p),
                      expl_prev=e_k)
