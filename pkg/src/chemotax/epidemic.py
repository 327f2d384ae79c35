"""Predictor-corrector stepper for the eight-compartment epidemic system.

Compartments, in the fixed storage order used throughout::

    0 S   susceptible
    1 E   exposed
    2 P   pre-symptomatic infectious
    3 A   asymptomatic infectious
    4 I-  mildly symptomatic infectious
    5 I+  symptomatic, will be hospitalized
    6 H   hospitalized (immobile: no diffusion, no drift)
    7 R   recovered

The seven mobile compartments move by the same singular-sensitivity operator
as the crime model (prefactor D/4, drift up gradients of ``log(p + p0)``)
where ``p`` is a location-popularity field with source
``delta_P_plus * (S+E+P+A+R)`` and decay ``delta_P_minus * p``.  The reaction
network transfers mass between compartments but never creates or destroys
it, so the total population is conserved; the corrector enforces exactly
that: an L2 projection of all eight compartments onto
``{psi >= 0, total mass = initial mass}`` via the scalar multiplier ``xi``,
plus the H1 positivity projection of ``p``.

Time discretization mirrors the two-field stepper: Crank-Nicolson on
diffusion (H has none and is advanced fully explicitly), Adams-Bashforth
(3/2, -1/2) on drift and reactions, one-step variant for the first interval.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Diverged, InvariantViolation, SpecMismatch
from .grid import (GridSpec, chemotaxis_divergence, laplacian, linf_norm,
                   log_chemotaxis_divergence, total_mass)
from .linsolve import KrylovConfig, SpectralPlan, solve_shifted_laplacian
from .projection import (ProjectionOutcome, project_h1_positive,
                         project_l2_mass_positive)

S, E, P, A, I_MINUS, I_PLUS, H, R = range(8)
COMPARTMENTS = ("S", "E", "P", "A", "I-", "I+", "H", "R")
MOBILE = (S, E, P, A, I_MINUS, I_PLUS, R)
CARRIERS = (E, P, A, I_MINUS, I_PLUS)


@dataclass(frozen=True)
class EpidemicParams:
    """Transition rates, probabilities and field coefficients.

    ``lambda_inf`` scales the force of infection
    ``lambda_inf * (beta*(P+A) + I- + I+) * S``; ``eta_lat`` ends latency,
    ``eta_prime`` sets symptom onset with symptomatic probability
    ``rho_sym`` and hospitalization probability ``p_H``; the ``delta_*``
    rates clear the respective compartments.  ``delta_P_plus`` and
    ``delta_P_minus`` drive the popularity field, ``D`` and ``eta_field``
    the agent and field diffusion, ``p0`` the environmental floor.
    """

    lambda_inf: float
    beta: float
    eta_lat: float
    eta_prime: float
    rho_sym: float
    p_H: float
    delta_I_plus: float
    delta_I_minus: float
    delta_A: float
    delta_H: float
    delta_R: float
    delta_P_plus: float
    delta_P_minus: float
    D: float
    eta_field: float
    p0: float | np.ndarray = 1.0 / 30.0
    drift: str = "ratio"

    def __post_init__(self):
        rates = (self.lambda_inf, self.beta, self.eta_lat, self.eta_prime,
                 self.delta_I_plus, self.delta_I_minus, self.delta_A,
                 self.delta_H, self.delta_R, self.delta_P_plus,
                 self.delta_P_minus)
        if any(r < 0 for r in rates):
            raise ValueError("rates must be nonnegative")
        if not (0.0 <= self.rho_sym <= 1.0 and 0.0 <= self.p_H <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if not np.min(self.p0) > 0:
            raise ValueError("the environmental floor p0 must be positive")
        if self.drift not in ("ratio", "log"):
            raise ValueError(f"unknown drift form {self.drift!r}")


def default_rates(D: float, eta_field: float, p0: float = 1.0 / 30.0,
                  drift: str = "ratio") -> EpidemicParams:
    """Baseline respiratory-outbreak rates used by the simulation examples."""
    return EpidemicParams(
        lambda_inf=1.018, beta=1.0, eta_lat=1.0 / 1.2, eta_prime=1.0 / 1.8,
        rho_sym=0.745, p_H=0.0272, delta_I_plus=1.0 / 3.8,
        delta_I_minus=1.0 / 7.5, delta_A=1.0 / 7.5, delta_H=1.0 / 6.0,
        delta_R=1.0 / 268.0, delta_P_plus=0.3, delta_P_minus=0.36,
        D=D, eta_field=eta_field, p0=p0, drift=drift)


def uniform_rates(value: float = 0.5, D: float = 0.01,
                  eta_field: float = 1.0,
                  p0: float = 1.0 / 30.0) -> EpidemicParams:
    """All transition rates set to one value; used by convergence studies."""
    return EpidemicParams(
        lambda_inf=value, beta=value, eta_lat=value, eta_prime=value,
        rho_sym=value, p_H=value, delta_I_plus=value, delta_I_minus=value,
        delta_A=value, delta_H=value, delta_R=value, delta_P_plus=value,
        delta_P_minus=value, D=D, eta_field=eta_field, p0=p0)


@dataclass
class EpidemicState:
    """Eight stacked compartments, the popularity field, and history.

    ``mass0`` is the conserved total population, fixed once from the initial
    data with the same quadrature used everywhere after.
    """

    spec: GridSpec
    psi: np.ndarray                      # (8, n, n)
    p: np.ndarray                        # (n, n)
    mass0: float
    time: float = 0.0
    prev: tuple[np.ndarray, np.ndarray] | None = None
    expl_prev: tuple | None = field(default=None, repr=False, compare=False)


def initial_epidemic_state(spec: GridSpec, psi0: np.ndarray,
                           p0_field: np.ndarray) -> EpidemicState:
    psi0 = np.array(psi0, dtype=float)
    if psi0.shape != (8, spec.n, spec.n):
        raise SpecMismatch("psi0 must be an (8, n, n) stack matching the grid")
    if p0_field.shape != (spec.n, spec.n):
        raise SpecMismatch("p0 must match the grid")
    return EpidemicState(spec=spec, psi=psi0,
                         p=np.array(p0_field, dtype=float),
                         mass0=total_mass(psi0, spec.h))


@dataclass
class EpidemicStepReport:
    """Projection outcomes of one corrected step (``psi`` carries ``xi``)."""

    psi: ProjectionOutcome
    p: ProjectionOutcome


def apply_linear_part(Phi: np.ndarray,
                      params: EpidemicParams) -> np.ndarray:
    """Compartment transfer matrix applied to the mobile stack.

    ``Phi`` is ordered (S, E, P, A, I-, I+, R) along its first axis; the
    result is the pointwise product of the 7x7 rate matrix with that vector.
    """
    S_, E_, P_, A_, IM_, IP_, R_ = Phi
    q = params
    out = np.empty_like(Phi)
    out[0] = q.delta_R * R_
    out[1] = -q.eta_lat * E_
    out[2] = q.eta_lat * E_ - q.eta_prime * P_
    out[3] = q.eta_prime * (1.0 - q.rho_sym) * P_ - q.delta_A * A_
    out[4] = q.eta_prime * q.rho_sym * (1.0 - q.p_H) * P_ - q.delta_I_minus * IM_
    out[5] = q.eta_prime * q.rho_sym * q.p_H * P_ - q.delta_I_plus * IP_
    out[6] = q.delta_A * A_ + q.delta_I_minus * IM_ - q.delta_R * R_
    return out


def apply_nonlinear_part(Phi: np.ndarray, H_field,
                         params: EpidemicParams) -> np.ndarray:
    """Force of infection plus hospital discharge, in mobile ordering."""
    S_, _, P_, A_, IM_, IP_, _ = Phi
    force = params.lambda_inf * (params.beta * (P_ + A_) + IM_ + IP_) * S_
    out = np.zeros_like(Phi)
    out[0] = -force
    out[1] = force
    out[6] = params.delta_H * H_field
    return out


def _explicit_epi(psi: np.ndarray, p: np.ndarray, params: EpidemicParams,
                  h: float):
    """Drift, reaction, hospital and field sources at one time level."""
    Phi = psi[list(MOBILE)]
    if params.drift == "log":
        chem = log_chemotaxis_divergence(Phi, p, params.p0, h)
    else:
        chem = chemotaxis_divergence(Phi, p, params.p0, h)
    e_Phi = (-(params.D / 2.0) * chem + apply_linear_part(Phi, params)
             + apply_nonlinear_part(Phi, psi[H], params))
    e_H = params.delta_I_plus * psi[I_PLUS] - params.delta_H * psi[H]
    e_p = (params.delta_P_plus * (psi[S] + psi[E] + psi[P] + psi[A] + psi[R])
           - params.delta_P_minus * p)
    return e_Phi, e_H, e_p


def _check_plan(state: EpidemicState, plan: SpectralPlan):
    if plan.spec != state.spec:
        raise SpecMismatch("spectral plan was built for a different grid")


def _assemble(Phi_t: np.ndarray, H_t: np.ndarray) -> np.ndarray:
    psi = np.empty((8,) + H_t.shape)
    psi[list(MOBILE)] = Phi_t
    psi[H] = H_t
    return psi


def predict_first_epi(state: EpidemicState, params: EpidemicParams,
                      tau: float, plan: SpectralPlan
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-step predictor; returns (mobile stack, H, p) intermediates."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    _check_plan(state, plan)
    h = state.spec.h
    e_Phi, e_H, e_p = _explicit_epi(state.psi, state.p, params, h)
    Phi = state.psi[list(MOBILE)]
    beta_phi = params.D * tau / 8.0
    beta_p = 0.5 * params.eta_field * params.D * tau
    Phi_t = solve_shifted_laplacian(
        1.0, beta_phi, Phi + beta_phi * laplacian(Phi, h) + tau * e_Phi, plan)
    H_t = state.psi[H] + tau * e_H
    p_t = solve_shifted_laplacian(
        1.0, beta_p, state.p + beta_p * laplacian(state.p, h) + tau * e_p,
        plan)
    return Phi_t, H_t, p_t


def _predict_ab2_epi(state: EpidemicState, params: EpidemicParams,
                     tau: float, plan: SpectralPlan):
    if state.prev is None:
        raise ValueError("two-step predictor needs one-step history")
    if not tau > 0:
        raise ValueError("tau must be positive")
    _check_plan(state, plan)
    h = state.spec.h
    e_k = _explicit_epi(state.psi, state.p, params, h)
    e_km1 = state.expl_prev
    if e_km1 is None:
        e_km1 = _explicit_epi(state.prev[0], state.prev[1], params, h)
    Phi = state.psi[list(MOBILE)]
    beta_phi = params.D * tau / 8.0
    beta_p = 0.5 * params.eta_field * params.D * tau
    rhs_Phi = (Phi + beta_phi * laplacian(Phi, h)
               + tau * (1.5 * e_k[0] - 0.5 * e_km1[0]))
    Phi_t = solve_shifted_laplacian(1.0, beta_phi, rhs_Phi, plan)
    H_t = state.psi[H] + tau * (1.5 * e_k[1] - 0.5 * e_km1[1])
    rhs_p = (state.p + beta_p * laplacian(state.p, h)
             + tau * (1.5 * e_k[2] - 0.5 * e_km1[2]))
    p_t = solve_shifted_laplacian(1.0, beta_p, rhs_p, plan)
    return Phi_t, H_t, p_t, e_k


def predict_ab2_epi(state: EpidemicState, params: EpidemicParams,
                    tau: float, plan: SpectralPlan
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Two-step predictor; returns (mobile stack, H, p) intermediates."""
    Phi_t, H_t, p_t, _ = _predict_ab2_epi(state, params, tau, plan)
    return Phi_t, H_t, p_t


def step_epi(state: EpidemicState, params: EpidemicParams, tau: float,
             plan: SpectralPlan, first_substeps: int = 1,
             mass_tol: float = 1e-12, h1_tol: float = 1e-10,
             h1_max_newton: int = 50, krylov: KrylovConfig | None = None
             ) -> tuple[EpidemicState, EpidemicStepReport]:
    """Advance one corrected step: predict, then restore positivity of all
    nine fields and the total population mass.

    The scalar multiplier ``xi`` absorbs exactly the mass the positivity
    clipping would otherwise create, so it is nonnegative whenever the
    predictor conserved mass; a materially negative ``xi`` is reported as an
    invariant violation.
    """
    if state.prev is None:
        sub = tau / first_substeps
        cur = state
        for _ in range(first_substeps):
            Phi_t, H_t, p_t = predict_first_epi(cur, params, sub, plan)
            cur, report = _correct(cur, Phi_t, H_t, p_t, cur.time + sub,
                                   None, plan, mass_tol, h1_tol,
                                   h1_max_newton, krylov)
        nxt = EpidemicState(spec=state.spec, psi=cur.psi, p=cur.p,
                            mass0=state.mass0, time=state.time + tau,
                            prev=(state.psi, state.p))
        return nxt, report

    Phi_t, H_t, p_t, e_k = _predict_ab2_epi(state, params, tau, plan)
    return _correct(state, Phi_t, H_t, p_t, state.time + tau, e_k, plan,
                    mass_tol, h1_tol, h1_max_newton, krylov)


def _correct(state, Phi_t, H_t, p_t, new_time, e_k, plan,
             mass_tol, h1_tol, h1_max_newton, krylov):
    spec, mass0 = state.spec, state.mass0
    psi_t = _assemble(Phi_t, H_t)
    psi_out = project_l2_mass_positive(psi_t, mass0, spec.h, tol=mass_tol)
    p_out = project_h1_positive(p_t, plan, cfg=krylov, tol=h1_tol,
                                max_newton=h1_max_newton)
    floor = 1e-12 * max(1.0, mass0) / spec.extent ** 2
    if psi_out.multiplier_xi < -floor:
        raise InvariantViolation(
            f"mass multiplier xi={psi_out.multiplier_xi:.3e} is negative "
            f"at t={new_time:g}: the predictor lost mass")
    nxt = EpidemicState(spec=spec, psi=psi_out.corrected, p=p_out.corrected,
                        mass0=mass0, time=new_time,
                        prev=(state.psi, state.p), expl_prev=e_k)
    return nxt, EpidemicStepReport(psi=psi_out, p=p_out)


def step_epi_uncorrected(state: EpidemicState, params: EpidemicParams,
                         tau: float, plan: SpectralPlan,
                         blowup_threshold: float = 1e8) -> EpidemicState:
    """Raw predictor step without any correction, for blow-up demonstrations.

    Raises:
        Diverged: non-finite values or max norm above ``blowup_threshold``.
    """
    if state.prev is None:
        Phi_t, H_t, p_t = predict_first_epi(state, params, tau, plan)
        e_k = None
    else:
        Phi_t, H_t, p_t, e_k = _predict_ab2_epi(state, params, tau, plan)
    psi_t = _assemble(Phi_t, H_t)
    norm = max(linf_norm(psi_t), linf_norm(p_t))
    if not np.isfinite(norm) or norm > blowup_threshold:
        raise Diverged(state.time + tau, norm)
    return EpidemicState(spec=state.spec, psi=psi_t, p=p_t,
                         mass0=state.mass0, time=state.time + tau,
                         prev=(state.psi, state.p), expl_prev=e_k)


def virus_carriers(state: EpidemicState, renormalize: bool = False) -> float:
    """Total mass of the infection-carrying compartments E, P, A, I-, I+."""
    m = total_mass(state.psi[list(CARRIERS)], state.spec.h)
    if renormalize:
        return m / state.mass0
    return m


def _ode_rhs(y: np.ndarray, params: EpidemicParams) -> np.ndarray:
    Phi = y[list(MOBILE)]
    dPhi = (apply_linear_part(Phi, params)
            + apply_nonlinear_part(Phi, y[H], params))
    dy = np.empty(8)
    dy[list(MOBILE)] = dPhi
    dy[H] = params.delta_I_plus * y[I_PLUS] - params.delta_H * y[H]
    return dy


def ode_reference(y0: np.ndarray, params: EpidemicParams, tau: float,
                  T: float, sample_every: int = 1
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Spatially homogeneous reference trajectory of the eight compartments.

    Integrates the well-mixed reaction system with the same two-step
    Adams-Bashforth rule (forward-Euler first step) that the field scheme
    degenerates to on spatially uniform data, so a uniform field run
    reproduces this trajectory to roundoff.  Every Adams-Bashforth stage is a
    linear combination of mass-free reaction evaluations, so ``sum(y)`` is
    conserved to roundoff.

    Returns (times, values) with ``values[k]`` the 8-vector at ``times[k]``,
    sampled every ``sample_every`` steps (the final time is always included).
    """
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (8,):
        raise ValueError("y0 must have 8 entries")
    if np.min(y0) < 0:
        raise ValueError("y0 must be nonnegative")
    if not tau > 0:
        raise ValueError("tau must be positive")
    steps = max(1, round(T / tau))
    times = [0.0]
    values = [y0.copy()]
    y = y0.copy()
    f_prev = None
    for k in range(steps):
        f = _ode_rhs(y, params)
        if f_prev is None:
            y = y + tau * f
        else:
            y = y + tau * (1.5 * f - 0.5 * f_prev)
        f_prev = f
        if (k + 1) % sample_every == 0 or k + 1 == steps:
            times.append((k + 1) * tau)
            values.append(y.copy())
    return np.array(times), np.array(values)
