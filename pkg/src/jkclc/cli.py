"""Command-line interface: ``jkclc {test, ci, power-limit, power-dgp}``.

Exit codes: 0 on success, 2 for usage or data errors, 3 for numerical
degeneracy.  Reports are JSON (``"schema_version": 1``); power tables and
CI grid decisions are CSV.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .design import build_projection, partial_out, read_csv
from .errors import DataError, DegenerateError
from .inference import (
    GammaPath,
    TestResult,
    bundle_at,
    confidence_interval,
    decide_clc,
    decide_simple,
    make_decider,
    two_step_test,
)
from .limit import MCConfig
from .selection import SelectionConfig

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE = 0, 2, 3
CI_KINDS = ("ar", "ar2", "lm", "lm_star", "clc_pp", "clc_krs", "two_step", "jive_wald")


class UsageError(Exception):
    pass


def _clean(obj):
    """Make a report JSON-safe: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _dump_json(report: dict, output: str | None):
    text = json.dumps(_clean(report), indent=2, sort_keys=True, allow_nan=False) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _selection(args) -> SelectionConfig:
    return SelectionConfig(
        p1=args.p1, p2=args.p2, t_grid=args.t_grid, delta_grid_size=args.delta_grid_size,
        mc=MCConfig(args.draws, args.seed), abar=args.abar,
    )


def _load(args):
    data = partial_out(read_csv(args.data))
    ctx = build_projection(data.Z, block_size=args.block_size)
    return data, ctx


def cmd_test(args) -> int:
    data, ctx = _load(args)
    cfg = _selection(args)
    path = GammaPath(ctx, data, args.variance)
    b = bundle_at(path, args.beta0)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "test",
        "beta0": args.beta0,
        "B": list(args.B),
        "n": data.n,
        "K": ctx.K,
        "alpha": args.alpha,
        "variance": args.variance,
        "method": args.method,
        "seed": args.seed,
        "d_hat": b.d_hat,
        "f_tilde": b.f_tilde,
        "gamma": b.gamma.as_dict(),
    }
    for kind in ("ar", "lm", "lm_star"):
        report[kind] = decide_simple(kind, b, args.alpha).as_dict()
    report["clc"] = decide_clc(b, args.beta0, args.B, args.alpha, args.method, cfg, n_obs=data.n).as_dict()
    report["two_step"] = two_step_test(ctx, data, args.beta0, args.alpha, args.variance, path=path).as_dict()
    _dump_json(report, args.output)
    return EXIT_OK


def cmd_ci(args) -> int:
    data, ctx = _load(args)
    cfg = _selection(args)
    kinds = [k.strip() for k in args.tests.split(",") if k.strip()]
    bad = [k for k in kinds if k not in CI_KINDS]
    if bad:
        raise UsageError(f"unknown test kind(s) {bad}; choose from {list(CI_KINDS)}")
    intervals, columns = {}, {}
    for kind in kinds:
        if args.force_accept:
            def decide(b0, i):
                return False
        else:
            decide = make_decider(kind, ctx, data, args.B, args.alpha, args.variance, cfg)
        ci = confidence_interval(ctx, data, decide, args.B, args.grid_n, args.alpha)
        intervals[kind] = ci.as_dict()
        columns[kind] = ci.accepted
        grid = ci.grid
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "ci",
        "B": list(args.B),
        "grid_n": args.grid_n,
        "n": data.n,
        "K": ctx.K,
        "alpha": args.alpha,
        "variance": args.variance,
        "seed": args.seed,
        "force_accept": bool(args.force_accept),
        "intervals": intervals,
    }
    if args.csv:
        import pandas as pd

        frame = pd.DataFrame({"beta0": grid, **{k: v.astype(int) for k, v in columns.items()}})
        frame.to_csv(args.csv, index=False, float_format="%.10g")
    _dump_json(report, args.output)
    return EXIT_OK


def _write_csv(frame, output: str | None):
    text = frame.to_csv(index=False, float_format="%.10g", lineterminator="\n")
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _tests(arg: str, allowed) -> tuple:
    kinds = tuple(k.strip() for k in arg.split(",") if k.strip())
    bad = [k for k in kinds if k not in allowed]
    if bad or not kinds:
        raise UsageError(f"unknown test kind(s) {bad}; choose from {list(allowed)}")
    return kinds


def cmd_power_limit(args) -> int:
    from .simulation import LIMIT_TESTS, LimitSimConfig, run_limit_power_study

    if args.reps < 1:
        raise UsageError("--reps must be positive")
    pairs = [(r, c) for r in args.rho for c in args.conc]
    if len(pairs) > 1 and not args.figure_layout:
        raise UsageError("several (rho, conc) pairs need --figure-layout")
    tests = _tests(args.tests, LIMIT_TESTS)
    for rho, conc in pairs:
        cfg = LimitSimConfig(
            rho=rho, conc=conc, reps=args.reps, alpha=args.alpha, seed=args.seed, grid_points=args.grid_points,
            mc_draws=args.draws, p1=args.p1, p2=args.p2, t_grid=args.t_grid,
            delta_grid_size=args.delta_grid_size, tests=tests, threads=args.threads,
        )
        frame = run_limit_power_study(cfg)
        if args.figure_layout:
            outdir = Path(args.output or ".")
            outdir.mkdir(parents=True, exist_ok=True)
            _write_csv(frame, str(outdir / f"power_limit_rho{rho:g}_C{conc:g}.csv"))
        else:
            _write_csv(frame, args.output)
    return EXIT_OK


def cmd_power_dgp(args) -> int:
    from .simulation import DGP_TESTS, load_calibration, run_dgp_power_study, synthetic_calibration

    if args.reps < 1:
        raise UsageError("--reps must be positive")
    tests = _tests(args.tests, DGP_TESTS + ("jive_wald",))
    kw = dict(
        reps=args.reps, seed=args.seed, beta0=args.beta0, B=tuple(args.B), grid_points=args.grid_points,
        alpha=args.alpha, mc_draws=args.draws, variance=args.variance, tests=tests, threads=args.threads,
        variant=args.variant,
    )
    if args.calibration:
        cfg = load_calibration(args.calibration, **kw)
        if args.variant == 2:
            cfg = replace(cfg, kappa1=2.7)
    else:
        variant = kw.pop("variant")
        cfg = synthetic_calibration(n=args.n, groups=args.groups, calibration_seed=args.calibration_seed, variant=variant, **kw)
    _write_csv(run_dgp_power_study(cfg), args.output)
    return EXIT_OK


def _add_selection(p):
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0, help="master seed for Monte Carlo draws")
    p.add_argument("--draws", type=int, default=2000, help="Monte Carlo draws R")
    p.add_argument("--p1", type=float, default=0.01)
    p.add_argument("--p2", type=float, default=1.1)
    p.add_argument("--t-grid", type=int, default=16)
    p.add_argument("--delta-grid-size", type=int, default=31)
    p.add_argument("--abar", type=float, default=0.999)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)


def _add_data(p):
    p.add_argument("--data", required=True, help="CSV with columns y, x, z1..zK and optional w1..wd")
    p.add_argument("--B", type=float, nargs=2, default=(-0.5, 0.5), metavar=("LOW", "HIGH"))
    p.add_argument("--variance", choices=("standard", "crossfit"), default="crossfit")
    p.add_argument("--block-size", type=int, default=256)
    p.add_argument("--output", help="write the JSON report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jkclc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="test H0: beta = beta0")
    _add_data(p)
    _add_selection(p)
    p.add_argument("--beta0", type=float, required=True)
    p.add_argument("--method", choices=("pp", "krs"), default="krs")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("ci", help="confidence intervals by test inversion")
    _add_data(p)
    _add_selection(p)
    p.add_argument("--tests", default="ar,lm,clc_krs", help=f"comma list from {','.join(CI_KINDS)}")
    p.add_argument("--grid-n", type=int, default=10_000)
    p.add_argument("--csv", help="write per-grid-point acceptance decisions here")
    p.add_argument("--force-accept", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("power-limit", help="power curves in the Gaussian limit experiment")
    _add_selection(p)
    p.add_argument("--rho", type=float, nargs="+", required=True)
    p.add_argument("--conc", type=float, nargs="+", required=True)
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--grid-points", type=int, default=31)
    p.add_argument("--tests", default="ar,lm,lm_star,clc_pp,clc_krs")
    p.add_argument("--figure-layout", action="store_true", help="one CSV per (rho, conc) in the --output directory")
    p.add_argument("--output", help="CSV path (directory with --figure-layout)")
    p.set_defaults(func=cmd_power_limit)

    p = sub.add_parser("power-dgp", help="power curves in the calibrated Poisson design")
    _add_selection(p)
    p.add_argument("--calibration", help="CSV with columns mean, omega, z1..zK")
    p.add_argument("--variant", type=int, choices=(1, 2), default=1)
    p.add_argument("--n", type=int, default=2000, help="sample size of the synthetic calibration")
    p.add_argument("--groups", type=int, default=25, help="groups of the synthetic calibration")
    p.add_argument("--calibration-seed", type=int, default=12345)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--beta0", type=float, default=0.1)
    p.add_argument("--B", type=float, nargs=2, default=(-0.5, 0.5), metavar=("LOW", "HIGH"))
    p.add_argument("--grid-points", type=int, default=31)
    p.add_argument("--variance", choices=("standard", "crossfit"), default="crossfit")
    p.add_argument("--tests", default="ar,lm,lm_star,clc_pp,clc_krs,two_step")
    p.add_argument("--output", help="CSV path")
    p.set_defaults(func=cmd_power_dgp)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "grid_n", 2) < 2:
            raise UsageError("--grid-n must be at least 2")
        return args.func(args)
    except (UsageError, DataError, ValueError, FileNotFoundError) as exc:
        print(f"jkclc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArithmeticError as exc:
        print(f"jkclc: numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
