"""Command-line front end.

Subcommands::

    chemotax converge --model {crime|epidemic} --mode {spatial|temporal}
    chemotax crime
    chemotax epidemic
    chemotax ode-ref

Global flags: ``--config <path>`` (key = value file, see README),
``--seed <int>``, ``--out <dir>``, ``--uncorrected``, ``--threads <n>``.

Exit codes: 0 success, 2 invariant violation, 3 divergence, 4 config error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .. import epidemic as epi
from ..errors import ConfigError, Diverged, InvariantViolation
from .config import build_config, default_sections, parse_config_file
from .convergence import run_convergence
from .drivers import _epidemic_params, run_crime, run_epidemic
from .io import export_csv

EXIT_OK = 0
EXIT_INVARIANT = 2
EXIT_DIVERGED = 3
EXIT_CONFIG = 4


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; route that to the config
    # error code instead, since 2 means an invariant violation here.
    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="key = value config file")
    common.add_argument("--seed", type=int, default=None,
                        help="RNG seed recorded in outputs")
    common.add_argument("--out", type=Path, default=None,
                        help="output directory")
    common.add_argument("--uncorrected", action="store_true", default=None,
                        help="skip the positivity/mass correction")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for parameter sweeps")

    parser = _Parser(prog="chemotax",
                     description="structure-preserving chemotaxis PDE runs")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    conv = sub.add_parser("converge", parents=[common],
                          help="grid/time refinement study")
    conv.add_argument("--model", choices=("crime", "epidemic"), default=None)
    conv.add_argument("--mode", choices=("spatial", "temporal"), default=None)

    sub.add_parser("crime", parents=[common],
                   help="crime hotspot pattern run")
    sub.add_parser("epidemic", parents=[common],
                   help="epidemic phase/blow-up run")
    sub.add_parser("ode-ref", parents=[common],
                   help="well-mixed epidemic reference trajectory")
    return parser


def _sections(args):
    if args.config is not None:
        return parse_config_file(args.config)
    return default_sections()


def _out_dir(args, sections) -> Path:
    out = args.out if args.out is not None else sections["common"]["out"]
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_converge(args) -> int:
    sections = _sections(args)
    q = sections["converge"]
    model = args.model or q["model"]
    mode = args.mode or q["mode"]
    out = _out_dir(args, sections)
    cache_dir = out / "cache" if q["cache"] else None
    table = run_convergence(
        model=model, mode=mode, resolutions=q["resolutions"],
        ref_n=int(q["ref_n"]), tau=float(q["tau"]), T=float(q["T"]),
        taus=q["taus"], grid_n=int(q["grid_n"]),
        tau_ref=float(q["tau_ref"]), T_temporal=float(q["T_temporal"]),
        D=(None if q["D"] == 0.0 else float(q["D"])), eta=float(q["eta"]),
        p0=float(q["p0"]), first_substeps=int(q["first_substeps"]),
        cache_dir=cache_dir)
    seed = args.seed if args.seed is not None else sections["common"]["seed"]
    export_csv(out / f"converge_{model}_{mode}.csv", table.columns(),
               {"seed": seed, "model": model, "mode": mode,
                "units": "errors in L2 (fields) and H1 (attractiveness)"})
    for row in table.rows:
        print(f"{row.resolution:12.6g}  err_phi={row.err_phi:.4e} "
              f"order={row.order_phi if row.order_phi is not None else '-'}"
              f"  err_p={row.err_p:.4e} "
              f"order={row.order_p if row.order_p is not None else '-'}")
    return EXIT_OK


def _cmd_run(args, model: str) -> int:
    sections = _sections(args)
    out = _out_dir(args, sections)
    cfg = build_config(model, sections, seed=args.seed, out=out,
                       uncorrected=args.uncorrected, threads=args.threads)
    runner = run_crime if model == "crime" else run_epidemic
    results = runner(cfg)
    for res in results:
        print(f"{res.label}: finished t={res.final_time:g} -> {res.out_dir}")
    return EXIT_OK


def _cmd_ode(args) -> int:
    sections = _sections(args)
    out = _out_dir(args, sections)
    q = sections["ode"]
    eq = sections["epidemic"]
    params = _epidemic_params(eq, float(eq["D"][0] if isinstance(eq["D"], tuple)
                                        else eq["D"]))
    frac = float(q["seed_fraction"])
    y0 = np.zeros(8)
    y0[epi.S] = 1.0 - 5 * frac
    for idx in (epi.E, epi.P, epi.A, epi.I_MINUS, epi.I_PLUS):
        y0[idx] = frac
    times, values = epi.ode_reference(y0, params, float(q["tau"]),
                                      float(q["T"]),
                                      sample_every=int(q["sample_every"]))
    seed = args.seed if args.seed is not None else sections["common"]["seed"]
    cols = {"t": times}
    for i, name in enumerate(("S", "E", "P", "A", "Iminus", "Iplus", "H", "R")):
        cols[name] = values[:, i]
    cols["carriers"] = values[:, list(epi.CARRIERS)].sum(axis=1)
    export_csv(out / "ode_reference.csv", cols,
               {"seed": seed, "units": "densities per unit area"})
    print(f"ode-ref: {len(times)} samples -> {out / 'ode_reference.csv'}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "converge":
            return _cmd_converge(args)
        if args.command == "crime":
            return _cmd_run(args, "crime")
        if args.command == "epidemic":
            return _cmd_run(args, "epidemic")
        if args.command == "ode-ref":
            return _cmd_ode(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except Diverged as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
