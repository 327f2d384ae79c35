"""Experiment configuration: defaults, config-file parsing, validation.

Config files are line oriented: ``[section]`` headers, ``key = value``
assignments, ``#`` comments and blank lines.  Sections are ``[common]`` plus
one per driver (``[crime]``, ``[epidemic]``, ``[converge]``, ``[ode]``).
Every key must be known; unknown sections or keys are hard errors so that a
typo cannot silently fall back to a default.  Values are parsed against the
type of the built-in default (numbers, booleans, or comma-separated number
lists).  All keys are documented in the README.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError

TWO_PI = 6.283185307179586

# Built-in defaults; the value types double as the parse schema.
DEFAULTS = {
    "common": {
        "seed": 1234,
        "out": "out",
        "threads": 1,
        "uncorrected": False,
    },
    "crime": {
        "n": 256,
        "domain_min": 0.0,
        "domain_max": TWO_PI,
        "tau": 0.01,
        "T": 800.0,
        "snapshots": (800.0,),
        "series_every": 10,
        "D": (0.01,),
        "eta": 0.2,
        "gamma": 0.019,
        "omega": 1.0 / 15.0,
        "kappa": 0.56,
        "a0": 1.0 / 30.0,
        "perturb_count": 30,
        "perturb_height": 0.02,
        "perturb_width": 0.005,
        "images": 1,
        "drift": "ratio",
        "first_substeps": 1,
        "blowup_threshold": 1e8,
    },
    "epidemic": {
        "n": 64,
        "domain_min": 0.0,
        "domain_max": 1.0,
        "tau": 0.1,
        "T": 300.0,
        "snapshots": (80.0, 300.0),
        "series_every": 1,
        "D": (0.00035,),
        "eta_field": 0.03125,
        "lambda": 1.018,
        "beta": 1.0,
        "eta_lat": 1.0 / 1.2,
        "eta_prime": 1.0 / 1.8,
        "rho_sym": 0.745,
        "p_hosp": 0.0272,
        "delta_i_plus": 1.0 / 3.8,
        "delta_i_minus": 1.0 / 7.5,
        "delta_a": 1.0 / 7.5,
        "delta_h": 1.0 / 6.0,
        "delta_r": 1.0 / 268.0,
        "delta_p_plus": 0.3,
        "delta_p_minus": 0.36,
        "p_floor": 1.0 / 30.0,
        "perturb_count": 30,
        "perturb_height": 0.001,
        "perturb_width": 0.01,
        "images": 20,
        "uniform_seed": 0.0,
        "renormalize": False,
        "drift": "log",
        "first_substeps": 1,
        "blowup_threshold": 1e8,
    },
    "converge": {
        "model": "crime",
        "mode": "spatial",
        "resolutions": (8, 16, 32, 64, 128),
        "ref_n": 512,
        "tau": 1e-4,
        "T": 0.1,
        "taus": (2e-3, 1e-3, 5e-4, 2.5e-4, 1.25e-4),
        "grid_n": 128,
        "tau_ref": 1e-5,
        "T_temporal": 0.2,
        "D": 0.0,          # 0 selects the per-model default
        "eta": 1.0,
        "p0": 1.0 / 30.0,
        "first_substeps": 1,
        "cache": True,
    },
    "ode": {
        "tau": 0.01,
        "T": 300.0,
        "sample_every": 10,
        "seed_fraction": 1e-4,
    },
}


def _parse_value(raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, tuple):
            parts = [p for p in raw.split(",") if p.strip()]
            inner = default[0] if default else 0.0
            cast = int if isinstance(inner, int) else float
            return tuple(cast(p) for p in parts)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"cannot parse value {raw!r}") from exc


def parse_config_file(path) -> dict:
    """Read and validate a config file into ``{section: {key: value}}``."""
    sections = {name: dict(vals) for name, vals in DEFAULTS.items()}
    current = "common"
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if text.startswith("[") and text.endswith("]"):
            current = text[1:-1].strip().lower()
            if current not in sections:
                raise ConfigError(f"{path}:{lineno}: unknown section "
                                  f"[{current}]")
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = text.partition("=")
        key = key.strip()
        if key not in DEFAULTS[current]:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r} in "
                              f"[{current}]")
        sections[current][key] = _parse_value(value, DEFAULTS[current][key])
    return sections


def default_sections() -> dict:
    return {name: dict(vals) for name, vals in DEFAULTS.items()}


@dataclass
class ExperimentConfig:
    """One resolved experiment: grid, stepping, model rates, run flags."""

    model: str
    seed: int
    out_dir: str
    threads: int = 1
    uncorrected: bool = False
    params: dict = field(default_factory=dict)

    def config_hash(self) -> str:
        """Stable digest of everything that defines the run (not the seed)."""
        body = f"{self.model}|{sorted(self.params.items())!r}|{self.uncorrected}"
        return hashlib.sha256(body.encode()).hexdigest()[:16]


def build_config(model: str, sections: dict, seed=None, out=None,
                 uncorrected=None, threads=None) -> ExperimentConfig:
    """Merge ``[common]``, the model section and CLI overrides."""
    if model not in sections:
        raise ConfigError(f"no section for model {model!r}")
    common = sections["common"]
    cfg = ExperimentConfig(
        model=model,
        seed=int(seed if seed is not None else common["seed"]),
        out_dir=str(out if out is not None else common["out"]),
        threads=int(threads if threads is not None else common["threads"]),
        uncorrected=bool(uncorrected if uncorrected is not None
                         else common["uncorrected"]),
        params=dict(sections[model]),
    )
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    if "tau" in cfg.params:
        tau, horizon = float(cfg.params["tau"]), float(cfg.params["T"])
        if not tau > 0:
            raise ConfigError("tau must be positive")
        if horizon < tau:
            raise ConfigError("T must be at least one step long")
    return cfg
