"""Grid and time-step refinement studies with nested-grid error sampling.

Protocol: runs on a ladder of resolutions are compared against one fine
reference run.  Spatial mode refines h at a fixed small tau; the reference
grid must contain every coarse grid's nodes, and errors are formed by
restricting the reference to the shared nodes (no interpolation).  Temporal
mode fixes the grid and refines tau against a much smaller reference step.
Errors are the L2 norm for the agent field(s) and the H1 norm for the
attractiveness field; observed orders are log2 ratios between adjacent rows.

Reference solutions are cached to disk keyed by a hash of the defining
parameters, since the reference dominates the runtime of a study.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..crime import general_params, initial_crime_state
from ..crime import step as crime_step
from ..epidemic import initial_epidemic_state, step_epi, uniform_rates
from ..errors import NonNestedGrids
from ..grid import GridSpec, h1_norm, l2_norm
from ..linsolve import SpectralPlan

SPATIAL_RESOLUTIONS = (8, 16, 32, 64, 128)
SPATIAL_REF_N = 512
SPATIAL_TAU = 1e-4
SPATIAL_T = 0.1
TEMPORAL_TAUS = (2e-3, 1e-3, 5e-4, 2.5e-4, 1.25e-4)
TEMPORAL_N = 128
TEMPORAL_TAU_REF = 1e-5
TEMPORAL_T = 0.2


@dataclass
class ConvergenceRow:
    resolution: float            # h in spatial mode, tau in temporal mode
    err_phi: float
    order_phi: float | None
    err_p: float
    order_p: float | None


@dataclass
class ConvergenceTable:
    model: str
    mode: str
    rows: list[ConvergenceRow]

    def columns(self) -> dict:
        """Column dict in export order (orders blank on the first row)."""
        return {
            "h_or_tau": [r.resolution for r in self.rows],
            "err_phi": [r.err_phi for r in self.rows],
            "order_phi": [np.nan if r.order_phi is None else r.order_phi
                          for r in self.rows],
            "err_p": [r.err_p for r in self.rows],
            "order_p": [np.nan if r.order_p is None else r.order_p
                        for r in self.rows],
        }

    def orders(self) -> tuple[list[float], list[float]]:
        return ([r.order_phi for r in self.rows if r.order_phi is not None],
                [r.order_p for r in self.rows if r.order_p is not None])


def smooth_crime_ic(spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Smooth product-of-waves initial data for the two-field studies."""
    X, Y = spec.meshgrid()
    wave = np.sin(2 * np.pi * (X - 0.5)) * np.cos(2 * np.pi * (Y - 0.5))
    return 0.1 * wave + 0.2, 0.5 * wave + 1.0


def smooth_epidemic_ic(spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Same waves replicated over all eight compartments."""
    phi, p = smooth_crime_ic(spec)
    return np.broadcast_to(phi, (8, spec.n, spec.n)).copy(), p


def _run_crime(n: int, tau: float, T: float, D: float, eta: float,
               p0: float, first_substeps: int):
    spec = GridSpec(n)
    plan = SpectralPlan(spec)
    params = general_params(D=D, eta=eta, p0=p0)
    phi, p = smooth_crime_ic(spec)
    state = initial_crime_state(spec, phi, p)
    for _ in range(round(T / tau)):
        state, _ = crime_step(state, params, tau, plan,
                              first_substeps=first_substeps)
    return state.phi, state.p


def _run_epidemic(n: int, tau: float, T: float, D: float, eta: float,
                  p0: float, first_substeps: int):
    spec = GridSpec(n)
    plan = SpectralPlan(spec)
    params = uniform_rates(0.5, D=D, eta_field=eta, p0=p0)
    psi, p = smooth_epidemic_ic(spec)
    state = initial_epidemic_state(spec, psi, p)
    for _ in range(round(T / tau)):
        state, _ = step_epi(state, params, tau, plan,
                            first_substeps=first_substeps)
    return state.psi, state.p


def _cached(cache_dir, key: str, compute):
    if cache_dir is None:
        return compute()
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    digest = hashlib.sha256(key.encode()).hexdigest()[:24]
    path = cache_dir / f"ref_{digest}.npz"
    if path.exists():
        data = np.load(path)
        return data["phi"], data["p"]
    phi, p = compute()
    np.savez_compressed(path, phi=phi, p=p)
    return phi, p


def run_convergence(model: str = "crime", mode: str = "spatial",
                    resolutions=SPATIAL_RESOLUTIONS, ref_n: int = SPATIAL_REF_N,
                    tau: float = SPATIAL_TAU, T: float = SPATIAL_T,
                    taus=TEMPORAL_TAUS, grid_n: int = TEMPORAL_N,
                    tau_ref: float = TEMPORAL_TAU_REF,
                    T_temporal: float = TEMPORAL_T,
                    D: float | None = None, eta: float = 1.0,
                    p0: float = 1.0 / 30.0, first_substeps: int = 1,
                    cache_dir=None) -> ConvergenceTable:
    """Run one of the four refinement studies and tabulate errors and orders.

    Model defaults: the two-field study uses D=0.1, the epidemic study
    D=0.01, both with eta=1 and floor 1/30 on the unit square.  The first
    time interval is advanced by the one-step scheme at each run's own step
    size (``first_substeps=1``), which is the protocol the reference error
    tables were produced with.
    """
    if model not in ("crime", "epidemic"):
        raise ValueError(f"unknown model {model!r}")
    if mode not in ("spatial", "temporal"):
        raise ValueError(f"unknown mode {mode!r}")
    if D is None:
        D = 0.1 if model == "crime" else 0.01
    runner = _run_crime if model == "crime" else _run_epidemic

    if mode == "spatial":
        for n in resolutions:
            if ref_n % n != 0:
                raise NonNestedGrids(f"reference n={ref_n} does not contain "
                                     f"the n={n} grid")
        key = f"{model}-spatial-{ref_n}-{tau}-{T}-{D}-{eta}-{p0}-{first_substeps}"
        ref_phi, ref_p = _cached(cache_dir, key,
                                 lambda: runner(ref_n, tau, T, D, eta, p0,
                                                first_substeps))
        rows = []
        for n in resolutions:
            phi, p = runner(n, tau, T, D, eta, p0, first_substeps)
            stride = ref_n // n
            h = GridSpec(n).h
            e_phi = phi - ref_phi[..., ::stride, ::stride]
            e_p = p - ref_p[::stride, ::stride]
            rows.append((h, l2_norm(e_phi, h), h1_norm(e_p, h)))
    else:
        key = (f"{model}-temporal-{grid_n}-{tau_ref}-{T_temporal}-{D}-{eta}-"
               f"{p0}-{first_substeps}")
        ref_phi, ref_p = _cached(cache_dir, key,
                                 lambda: runner(grid_n, tau_ref, T_temporal,
                                                D, eta, p0, first_substeps))
        h = GridSpec(grid_n).h
        rows = []
        for t in taus:
            phi, p = runner(grid_n, t, T_temporal, D, eta, p0, first_substeps)
            rows.append((t, l2_norm(phi - ref_phi, h), h1_norm(p - ref_p, h)))

    table = []
    for i, (res, e_phi, e_p) in enumerate(rows):
        if i == 0:
            table.append(ConvergenceRow(res, e_phi, None, e_p, None))
        else:
            prev = rows[i - 1]
            table.append(ConvergenceRow(
                res, e_phi, float(np.log2(prev[1] / e_phi)),
                e_p, float(np.log2(prev[2] / e_p))))
    return ConvergenceTable(model=model, mode=mode, rows=table)
