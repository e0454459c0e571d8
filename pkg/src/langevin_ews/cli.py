"""Command-line entry point: simulate, analyze, experiment, grid."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .exceptions import ConfigError, LangevinEWSError
from .io import (
    dump_json,
    fmt,
    load_model_config,
    load_yaml,
    read_timeseries_csv,
    write_rows,
    write_timeseries_csv,
)
from .models import ModelSpec
from .pipeline import AnalysisConfig, SimulationConfig, analyze, detection_grid

class UsageError(LangevinEWSError):
    category = "usage"

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)

def _floats(text):
    try:
        values = [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a comma-separated list of numbers: {text!r}"
        ) from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values

def cmd_simulate(args):
    model, sim = load_model_config(args.model)
    try:
        sim = SimulationConfig.from_dict(sim)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    traj = sim.run(model, [args.seed], on_blowup="raise")
    ts = traj.member(0)
    write_timeseries_csv(ts, args.out)
    return {"out": str(args.out), "samples": len(ts), "dim": ts.n, "seed": args.seed}

def cmd_analyze(args):
    if args.stride is not None and args.overlap is not None:
        raise ConfigError("give either --stride or --overlap, not both")
    stride = args.stride
    if args.overlap is not None:
        if not 0 <= args.overlap < 1:
            raise ConfigError("--overlap must lie in [0, 1)")
        stride = args.window * (1.0 - args.overlap)
    cfg = AnalysisConfig(window_len=args.window, stride=stride, M=args.M, m=args.m,
                         bandwidth=args.bandwidth, min_weight_mass=args.min_weight_mass)
    ts = read_timeseries_csv(args.input)
    series = analyze(ts, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    series.to_csv(out / "series.csv")
    dump_json(series.stability_records(), out / "stability.json")
    fields = out / "fields"
    for k, rec in enumerate(series.records):
        if rec.estimate is not None:
            fld = rec.estimate.field
            write_rows(fields / f"window_{k:03d}.csv", fld.csv_header(), fld.csv_rows())
    summary = {
        "version": __version__,
        "input": str(args.input),
        "config": {"window_len": cfg.window_len, "stride": cfg.stride, "M": cfg.M, "m": cfg.m,
                   "bandwidth": cfg.bandwidth, "min_weight_mass": cfg.min_weight_mass},
        "windows": len(series.records),
        "failed_windows": {f"{r.time:g}": r.status for r in series.records if not r.ok},
    }
    dump_json(summary, out / "summary.json")
    return {"out": str(out), "windows": len(series.records)}

def cmd_experiment(args):
    from .experiments import run_experiment

    res = run_experiment(args.name, N=args.N, seed=args.seed, out=args.out, n_jobs=args.jobs)
    return {"experiment": args.name, "passed": res.passed,
            "checks": {c.name: bool(c.passed) for c in res.checks}}

GRID_KEYS = {"model_a", "model_b", "N", "seed", "indicator_dimension", "substeps", "percentiles"}

def cmd_grid(args):
    cfg = load_yaml(args.models)
    unknown = set(cfg) - GRID_KEYS
    if unknown:
        raise ConfigError(f"{args.models}: unknown keys {sorted(unknown)}")
    if "model_a" not in cfg or "model_b" not in cfg:
        raise ConfigError(f"{args.models}: need 'model_a' and 'model_b'")
    a, b = ModelSpec.from_config(cfg["model_a"]), ModelSpec.from_config(cfg["model_b"])
    N = int(args.N if args.N is not None else cfg.get("N", 100))
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    dim = int(cfg.get("indicator_dimension", 1)) - 1
    if not 0 <= dim < a.dim or a.dim != b.dim:
        raise ConfigError("indicator_dimension out of range or model dimensions differ")
    acfg = AnalysisConfig(N=N, seed=seed, percentiles=tuple(cfg.get("percentiles", (2.5, 97.5))))
    grid = detection_grid(a, b, args.T, args.dt, acfg, dim=dim,
                          substeps=int(cfg.get("substeps", 10)))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        grid.to_csv(out / "grid.csv")
        dump_json({"version": __version__, "models": str(args.models), "N": N, "seed": seed,
                   "T": args.T, "dt": args.dt}, out / "summary.json")
    else:
        write = sys.stdout.write
        write(",".join(grid.header) + "\n")
        for c in grid.cells:
            write(",".join(fmt(v) for v in c.row()) + "\n")
    return {"cells": len(grid.cells),
            "separated": sum(c.separated for c in grid.cells)}

def build_parser():
    p = _Parser(prog="langevin-ews", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="integrate one trajectory to CSV")
    s.add_argument("--model", required=True, type=Path, help="YAML model configuration")
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("analyze", help="sliding-window indicators of a CSV series")
    s.add_argument("--in", dest="input", required=True, type=Path)
    s.add_argument("--window", required=True, type=float, help="window length (time units)")
    s.add_argument("--stride", type=float, default=None, help="window stride (time units)")
    s.add_argument("--overlap", type=float, default=None, help="overlap fraction in [0, 1)")
    s.add_argument("--M", type=int, default=50)
    s.add_argument("--m", type=float, default=0.5)
    s.add_argument("--bandwidth", type=float, default=None)
    s.add_argument("--min-weight-mass", type=float, default=None)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("experiment", help="run a named scenario")
    s.add_argument("name", choices=["fig1", "fig2", "fig3", "fig4", "fig5", "fig6"])
    s.add_argument("--N", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", type=Path, default=None)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("grid", help="separation tests over a (T, dt) grid")
    s.add_argument("--models", required=True, type=Path, help="YAML with model_a/model_b")
    s.add_argument("--T", required=True, type=_floats)
    s.add_argument("--dt", required=True, type=_floats)
    s.add_argument("--N", type=int, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", type=Path, default=None)
    s.set_defaults(func=cmd_grid)
    return p

def _fail(category, message):
    sys.stderr.write(json.dumps({"error": category, "message": message}) + "\n")

def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        result = args.func(args)
    except LangevinEWSError as exc:
        _fail(exc.category, str(exc))
        return 2
    except (OSError, ValueError) as exc:
        _fail("io" if isinstance(exc, OSError) else "invalid_input", str(exc))
        return 2
    sys.stderr.write(json.dumps(result, default=float, sort_keys=True) + "\n")
    return 0

if __name__ == "__main__":
    sys.exit(main())
