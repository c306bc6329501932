"""Command line interface: ``flatlpp list | verify | simulate | density | plot``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for usage or
configuration errors.  The default output directory is taken from the
``FLATLPP_OUTPUT_DIR`` environment variable.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import determinantal as det
from .experiments import (OUTPUT_ENV, REGISTRY, ConfigError, ExperimentConfig, ExperimentError,
                          default_output_dir, emit_plots, emit_report, list_experiments, run_experiment)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _tolerance(text: str) -> tuple:
    name, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("tolerance must look like name=value")
    return name, float(val)


def _add_config_flags(p):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--n", type=int)
    p.add_argument("--drifts", type=_floats, help="comma-separated drifts, e.g. 0.7,1.6")
    p.add_argument("--samples", type=int, dest="N_samples")
    p.add_argument("--T", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--beta-list", type=_floats, dest="beta_list")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=_tolerance, action="append", default=[], help="override a tolerance: name=value")
    p.add_argument("--output-dir", help=f"output directory (default ${OUTPUT_ENV} or ./flatlpp-out)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flatlpp", description="Flat LPP / reflected Brownian motion verification toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("list", help="list registered experiments")

    v = sub.add_parser("verify", help="run an experiment (or 'all' / 'acceptance') and write reports")
    v.add_argument("experiment")
    v.add_argument("--format", choices=["json", "csv", "both"], default="both")
    v.add_argument("--plots", action="store_true", help="also write SVG plots")
    _add_config_flags(v)

    pl = sub.add_parser("plot", help="run an experiment and write its SVG plots")
    pl.add_argument("experiment")
    _add_config_flags(pl)

    s = sub.add_parser("simulate", help="sample a system and dump it as CSV")
    s.add_argument("system", choices=["lpp", "loggamma", "wall", "xarray"])
    s.add_argument("--drifts", type=_floats, required=True)
    s.add_argument("--T", type=float, default=10.0)
    s.add_argument("--dt", type=float, default=1e-2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output-dir")

    d = sub.add_parser("density", help="evaluate an exact density or distribution function")
    d.add_argument("kind", choices=["pi", "r_t", "cdf", "toda", "exp_det", "Q"])
    d.add_argument("--drifts", type=_floats, required=True)
    d.add_argument("--x", type=_floats, help="point(s); for cdf/toda a list of arguments")
    d.add_argument("--y", type=_floats)
    d.add_argument("--t", type=float, default=1.0)
    d.add_argument("--m", type=int, default=1)
    return parser


def _config_from_args(args, experiment: str) -> ExperimentConfig:
    data = {}
    if args.config:
        data = ExperimentConfig.from_file(args.config).__dict__.copy()
    data["experiment"] = experiment
    for key in ("n", "drifts", "N_samples", "T", "dt", "beta_list", "seed", "output_dir"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    tols = dict(data.get("tolerances") or {})
    tols.update(dict(args.tol))
    data["tolerances"] = tols
    return ExperimentConfig.from_mapping(data)


def _selected(name: str) -> list:
    if name in ("all", "acceptance"):
        return [e.name for e in list_experiments() if name == "all" or e.criterion is not None]
    if name not in REGISTRY:
        raise ConfigError(f"unknown experiment {name!r}; registered: {', '.join(REGISTRY)}")
    return [name]


def _cmd_list(args) -> int:
    for e in list_experiments():
        crit = f"{e.criterion:>2}" if e.criterion else " -"
        print(f"{crit}  {e.name:<24} {e.summary}")
    return EXIT_OK


def _cmd_verify(args, plots_only: bool = False) -> int:
    names = _selected(args.experiment)
    ok = True
    for name in names:
        cfg = _config_from_args(args, name)
        cfg.resolved()
        base = cfg.output_dir or default_output_dir()
        out = base if len(names) == 1 else os.path.join(base, name)
        report = run_experiment(cfg)
        if not plots_only:
            fmts = ["json", "csv"] if args.format == "both" else [args.format]
            for fmt in fmts:
                emit_report(report, fmt, out)
        if plots_only or args.plots:
            emit_plots(report, out)
        print(report.summary_line())
        ok &= report.passed
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_simulate(args) -> int:
    from .lpp import gen_environment
    from .reflected import export_trajectory_csv, sample_path_bundle, wall_trajectory, x_array_simulate

    out = os.path.join(args.output_dir or default_output_dir(), "env_dumps")
    os.makedirs(out, exist_ok=True)
    alpha = args.drifts
    if args.system in ("lpp", "loggamma"):
        kind = "exponential" if args.system == "lpp" else "inverse_gamma"
        env = gen_environment(alpha, kind, seed=args.seed)
        path = os.path.join(out, f"{args.system}_env_seed{args.seed}.csv")
        env.to_csv(path)
    elif args.system == "wall":
        paths = sample_path_bundle(alpha, args.T, args.dt, seed=args.seed)
        traj = wall_trajectory(paths, "bridge", record=True)
        path = os.path.join(out, f"wall_seed{args.seed}.csv")
        export_trajectory_csv(path, paths.times, traj, [(1, j) for j in range(1, len(alpha) + 1)])
    else:
        res = x_array_simulate(alpha, args.T, args.dt, seed=args.seed, record_every=args.dt * 10)
        path = os.path.join(out, f"xarray_seed{args.seed}.csv")
        export_trajectory_csv(path, res.times, res.states, res.cells)
    print(path)
    return EXIT_OK


def _cmd_density(args) -> int:
    alpha = args.drifts
    x = None if args.x is None else np.array(args.x)
    if args.kind in ("pi", "exp_det") and x is None:
        raise UsageError("--x is required")
    if args.kind == "pi":
        val = det.eval_pi(alpha, x)
    elif args.kind == "exp_det":
        val = det.eval_exp_det_density(alpha, x)
    elif args.kind in ("r_t", "Q"):
        if x is None or args.y is None:
            raise UsageError("--x and --y are required")
        if args.kind == "r_t":
            val = det.eval_r_t(alpha, args.t, x, np.array(args.y))
        else:
            val = det.eval_Q_m(alpha, args.m, x, np.array(args.y))
    elif args.kind == "cdf":
        if x is None:
            raise UsageError("--x is required")
        val = det.eval_cdf_top(alpha, x)
    else:
        if x is None:
            raise UsageError("--x is required")
        if any(a != 1.0 for a in alpha):
            raise UsageError("the Toda form is implemented for unit drifts")
        val = det.eval_cdf_toda(len(alpha), x)
    val = np.atleast_1d(np.asarray(val, float)).tolist()
    print(json.dumps({"kind": args.kind, "drifts": list(alpha), "value": val if len(val) > 1 else val[0]}))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "list":
            return _cmd_list(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "plot":
            return _cmd_verify(args, plots_only=True)
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_density(args)
    except (UsageError, ConfigError) as exc:
        print(f"flatlpp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (det.DeterminantalError, ValueError) as exc:
        print(f"flatlpp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExperimentError as exc:
        print(f"flatlpp: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
