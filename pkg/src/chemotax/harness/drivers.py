"""Experiment drivers: pattern-formation runs with audited invariants.

Each driver integrates one parameter cell, records a time series, emits
heatmap snapshots, and enforces run-time audits (positivity, mass
conservation, multiplier sign).  A divergence in an uncorrected run surfaces
as :class:`~chemotax.errors.Diverged` after the last valid snapshot is
written.  Parameter sweeps (several diffusion values) run cell by cell in a
thread pool; cells are independent and each stays sequential inside.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import epidemic as epi
from ..crime import (crime_equilibrium, crime_params, initial_crime_state,
                     reaction_terms, step, step_uncorrected)
from ..errors import Diverged, DomainError, InvariantViolation
from ..grid import GridSpec, total_mass
from ..linsolve import SpectralPlan
from .config import ExperimentConfig
from .io import export_csv, export_heatmap
from .perturb import gaussian_perturbation


@dataclass
class CellResult:
    """Summary of one integrated parameter cell."""

    label: str
    out_dir: Path
    final_time: float
    series: dict
    diverged_at: float | None = None


def _audit_positive(name: str, value: float, scale: float, t: float):
    if value < -1e-12 * max(scale, 1.0):
        raise InvariantViolation(
            f"{name} reached {value:.3e} at t={t:g} (scale {scale:.3e})")


def _snapshot_steps(snapshots, tau, steps):
    marks = {}
    for t in snapshots:
        k = round(t / tau)
        if 0 < k <= steps:
            marks.setdefault(k, t)
    return marks


def run_crime_cell(cfg: ExperimentConfig, D: float) -> CellResult:
    """Integrate one crime-model cell from the perturbed uniform state."""
    q = cfg.params
    spec = GridSpec(int(q["n"]), float(q["domain_min"]), float(q["domain_max"]))
    plan = SpectralPlan(spec)
    params = crime_params(D=D, eta=float(q["eta"]), a0=float(q["a0"]),
                          gamma=float(q["gamma"]), omega=float(q["omega"]),
                          kappa=float(q["kappa"]),
                          drift=str(q.get("drift", "ratio")))
    rho_bar, a_bar = crime_equilibrium(params)
    delta = gaussian_perturbation(spec, cfg.seed, int(q["perturb_count"]),
                                  float(q["perturb_height"]),
                                  float(q["perturb_width"]),
                                  int(q["images"]))
    state = initial_crime_state(spec, rho_bar + delta, a_bar + delta)

    tau, T = float(q["tau"]), float(q["T"])
    steps = round(T / tau)
    marks = _snapshot_steps(q["snapshots"], tau, steps)
    every = max(1, int(q["series_every"]))
    label = f"crime_D{D:g}_eta{q['eta']:g}"
    out = Path(cfg.out_dir) / label
    out.mkdir(parents=True, exist_ok=True)
    meta = {"seed": cfg.seed, "config": cfg.config_hash(), "D": D,
            "eta": q["eta"],
            "units": "t in model time, densities per unit area"}

    series = {k: [] for k in ("t", "min_rho", "max_rho", "min_a", "max_a",
                              "mass_rho", "mass_a", "reaction_rate_rho",
                              "clip_mass_rho")}

    def record(st, report=None):
        series["t"].append(st.time)
        series["min_rho"].append(float(st.phi.min()))
        series["max_rho"].append(float(st.phi.max()))
        series["min_a"].append(float(st.p.min()))
        series["max_a"].append(float(st.p.max()))
        series["mass_rho"].append(total_mass(st.phi, spec.h))
        series["mass_a"].append(total_mass(st.p, spec.h))
        # density mass budget: gain gamma*|domain| minus the interaction
        # sink, plus whatever mass the positivity clip added this step
        f_phi, _ = reaction_terms(st.phi, st.p, params)
        series["reaction_rate_rho"].append(total_mass(f_phi, spec.h))
        clip = 0.0 if report is None else total_mass(
            report.phi.multiplier_lambda, spec.h)
        series["clip_mass_rho"].append(clip)

    record(state)
    diverged_at = None
    try:
        for k in range(1, steps + 1):
            report = None
            if cfg.uncorrected:
                try:
                    state = step_uncorrected(
                        state, params, tau, plan,
                        blowup_threshold=float(q["blowup_threshold"]))
                except DomainError as exc:
                    raise Diverged(state.time, float("inf")) from exc
            else:
                state, report = step(state, params, tau, plan,
                                     first_substeps=int(q["first_substeps"]))
                _audit_positive("min rho", float(state.phi.min()),
                                float(state.phi.max()), state.time)
                _audit_positive("min a", float(state.p.min()),
                                float(state.p.max()), state.time)
            if k % every == 0 or k == steps:
                record(state, report)
            if k in marks:
                t = marks[k]
                export_heatmap(state.phi, out / f"rho_t{t:g}.pgm", meta)
                export_heatmap(state.p, out / f"attract_t{t:g}.pgm", meta)
    except Diverged as exc:
        diverged_at = exc.time
        export_heatmap(state.phi, out / "rho_last_valid.pgm", meta)
        export_heatmap(state.p, out / "attract_last_valid.pgm", meta)
        export_csv(out / "series.csv", series, meta)
        raise
    export_csv(out / "series.csv", series, meta)
    return CellResult(label=label, out_dir=out, final_time=state.time,
                      series=series, diverged_at=diverged_at)


def epidemic_initial_fields(cfg: ExperimentConfig, spec: GridSpec,
                            params: epi.EpidemicParams
                            ) -> tuple[np.ndarray, np.ndarray]:
    """Seeded outbreak: unit susceptible density minus five independent bump
    fields that become E, P, A, I-, I+; the popularity field starts at its
    pointwise source/decay balance.  A positive ``uniform_seed`` replaces the
    random bumps with that constant level (spatially homogeneous outbreak,
    used to validate the reduction to the well-mixed reference)."""
    q = cfg.params
    if float(q.get("uniform_seed", 0.0)) > 0.0:
        deltas = [np.full((spec.n, spec.n), float(q["uniform_seed"]))
                  for _ in range(5)]
    else:
        rng = np.random.default_rng(cfg.seed)
        deltas = [gaussian_perturbation(spec, rng, int(q["perturb_count"]),
                                        float(q["perturb_height"]),
                                        float(q["perturb_width"]),
                                        int(q["images"]))
                  for _ in range(5)]
    psi = np.zeros((8, spec.n, spec.n))
    psi[epi.S] = 1.0 - sum(deltas)
    psi[epi.E], psi[epi.P], psi[epi.A] = deltas[0], deltas[1], deltas[2]
    psi[epi.I_MINUS], psi[epi.I_PLUS] = deltas[3], deltas[4]
    mobile_quiet = psi[epi.S] + psi[epi.E] + psi[epi.P] + psi[epi.A] + psi[epi.R]
    p = params.delta_P_plus * mobile_quiet / params.delta_P_minus
    return psi, p


def _epidemic_params(q: dict, D: float) -> epi.EpidemicParams:
    return epi.EpidemicParams(
        lambda_inf=float(q["lambda"]), beta=float(q["beta"]),
        eta_lat=float(q["eta_lat"]), eta_prime=float(q["eta_prime"]),
        rho_sym=float(q["rho_sym"]), p_H=float(q["p_hosp"]),
        delta_I_plus=float(q["delta_i_plus"]),
        delta_I_minus=float(q["delta_i_minus"]),
        delta_A=float(q["delta_a"]), delta_H=float(q["delta_h"]),
        delta_R=float(q["delta_r"]), delta_P_plus=float(q["delta_p_plus"]),
        delta_P_minus=float(q["delta_p_minus"]),
        D=D, eta_field=float(q["eta_field"]), p0=float(q["p_floor"]),
        drift=str(q.get("drift", "ratio")))


def run_epidemic_cell(cfg: ExperimentConfig, D: float) -> CellResult:
    """Integrate one epidemic cell with full invariant audits.

    The carriers series carries the matching well-mixed reference trajectory
    alongside the field result.
    """
    q = cfg.params
    spec = GridSpec(int(q["n"]), float(q["domain_min"]), float(q["domain_max"]))
    plan = SpectralPlan(spec)
    params = _epidemic_params(q, D)
    psi0, p0 = epidemic_initial_fields(cfg, spec, params)
    state = epi.initial_epidemic_state(spec, psi0, p0)
    renorm = bool(q["renormalize"])

    tau, T = float(q["tau"]), float(q["T"])
    steps = round(T / tau)
    marks = _snapshot_steps(q["snapshots"], tau, steps)
    every = max(1, int(q["series_every"]))
    label = f"epidemic_D{D:g}_eta{q['eta_field']:g}"
    out = Path(cfg.out_dir) / label
    out.mkdir(parents=True, exist_ok=True)
    meta = {"seed": cfg.seed, "config": cfg.config_hash(), "D": D,
            "eta_field": q["eta_field"],
            "units": "t in days, masses absolute, carriers "
                     + ("renormalized" if renorm else "absolute")}

    area = spec.extent ** 2
    y0 = np.array([total_mass(state.psi[i], spec.h) / area for i in range(8)])
    ode_t, ode_y = epi.ode_reference(y0, params, tau, T,
                                     sample_every=every)
    ode_carriers = ode_y[:, list(epi.CARRIERS)].sum(axis=1) * area
    if renorm:
        ode_carriers = ode_carriers / state.mass0

    series = {k: [] for k in ("t", "carriers", "ode_carriers", "min_psi",
                              "min_p", "mass", "xi", "mass_iters",
                              "h1_iters")}
    ode_idx = 0

    def record(st, report=None):
        nonlocal ode_idx
        series["t"].append(st.time)
        series["carriers"].append(epi.virus_carriers(st, renormalize=renorm))
        series["ode_carriers"].append(float(ode_carriers[min(ode_idx,
                                                             len(ode_t) - 1)]))
        ode_idx += 1
        series["min_psi"].append(float(st.psi.min()))
        series["min_p"].append(float(st.p.min()))
        series["mass"].append(total_mass(st.psi, spec.h))
        series["xi"].append(0.0 if report is None
                            else report.psi.multiplier_xi)
        series["mass_iters"].append(0 if report is None
                                    else report.psi.newton_iterations)
        series["h1_iters"].append(0 if report is None
                                  else report.p.newton_iterations)

    def mobile_density(st):
        return st.psi[list(epi.MOBILE)].sum(axis=0)

    record(state)
    diverged_at = None
    try:
        for k in range(1, steps + 1):
            if cfg.uncorrected:
                try:
                    state = epi.step_epi_uncorrected(
                        state, params, tau, plan,
                        blowup_threshold=float(q["blowup_threshold"]))
                    report = None
                except DomainError as exc:
                    raise Diverged(state.time, float("inf")) from exc
            else:
                state, report = epi.step_epi(
                    state, params, tau, plan,
                    first_substeps=int(q["first_substeps"]))
                _audit_positive("min psi", float(state.psi.min()),
                                float(np.abs(state.psi).max()), state.time)
                _audit_positive("min p", float(state.p.min()),
                                float(np.abs(state.p).max()), state.time)
                mass = total_mass(state.psi, spec.h)
                if abs(mass - state.mass0) > 1e-11 * state.mass0:
                    raise InvariantViolation(
                        f"total mass drifted to {mass!r} from "
                        f"{state.mass0!r} at t={state.time:g}")
            if k % every == 0 or k == steps:
                record(state, report)
            if k in marks:
                t = marks[k]
                export_heatmap(mobile_density(state),
                               out / f"mobile_t{t:g}.pgm", meta)
    except Diverged as exc:
        diverged_at = exc.time
        export_heatmap(mobile_density(state), out / "mobile_last_valid.pgm",
                       meta)
        export_csv(out / "carriers.csv", series, meta)
        raise
    export_csv(out / "carriers.csv", series, meta)
    return CellResult(label=label, out_dir=out, final_time=state.time,
                      series=series, diverged_at=diverged_at)


def run_crime(cfg: ExperimentConfig) -> list[CellResult]:
    """Run every diffusion value in the config, pooled across threads."""
    return _run_cells(run_crime_cell, cfg, cfg.params["D"])


def run_epidemic(cfg: ExperimentConfig) -> list[CellResult]:
    """Run every diffusion value in the config, pooled across threads."""
    return _run_cells(run_epidemic_cell, cfg, cfg.params["D"])


def _run_cells(cell_fn, cfg: ExperimentConfig, sweep) -> list[CellResult]:
    values = tuple(sweep) if isinstance(sweep, (tuple, list)) else (sweep,)
    if cfg.threads == 1 or len(values) == 1:
        return [cell_fn(cfg, float(v)) for v in values]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        futures = [pool.submit(cell_fn, cfg, float(v)) for v in values]
        return [f.result() for f in futures]
