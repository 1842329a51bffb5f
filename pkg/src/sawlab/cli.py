"""Command-line driver: ``sawlab {half,sphere,p2p,lattice-effect,fit-b,predict}``.

Angles are degrees on the command line and in every CSV.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import io
from .ensembles import ExponentSet, B_FIT, GAMMA, GAMMA1, NU
from .experiments import RunSpec, degree_grid, run, run_lattice_effect
from .lattice_effect import LatticeEffectTable
from .predictions import (
    BISECT, HALF_SPACE, SPHERE, PredictedCdf, cdf_bisect, cdf_sphere, conditioned_cdf_half, fit_b,
)

log = logging.getLogger("sawlab")


class ConfigError(ValueError):
    pass


def count(text: str) -> int:
    """Positive integer; accepts ``1e6`` style."""
    v = float(text)
    if v != int(v) or v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(v)


def nonneg(text: str) -> int:
    v = float(text)
    if v != int(v) or v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text!r}")
    return int(v)


def _common(p: argparse.ArgumentParser, n_default: int, samples_default: int) -> None:
    p.add_argument("--n-steps", type=count, default=n_default)
    p.add_argument("--samples", type=count, default=samples_default)
    p.add_argument("--stride", type=count, default=None, help="pivot attempts between samples")
    p.add_argument("--warmup", type=nonneg, default=None, help="default: 20 * n-steps")
    p.add_argument("--chains", type=count, default=1)
    p.add_argument("--workers", type=count, default=1, help="processes; does not change results")
    p.add_argument("--batches", type=count, default=50, help="batch-means batches per chain")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    _exponent_flags(p)


def _exponent_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--nu", type=float, default=NU)
    p.add_argument("--gamma", type=float, default=GAMMA)
    p.add_argument("--gamma1", type=float, default=GAMMA1)
    p.add_argument("--b", type=float, default=B_FIT)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sawlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("half", help="half-space hitting angle vs prediction")
    _common(p, 10_000, 100_000)
    p.add_argument("--theta-max", type=float, default=85.0, help="conditioning angle, degrees")

    p = sub.add_parser("sphere", help="sphere hitting angle vs prediction")
    _common(p, 5_000, 100_000)
    p.add_argument("--a", type=float, default=0.75)
    p.add_argument("--lattice-effect-table")
    p.add_argument("--no-lattice-effect", action="store_true")

    p = sub.add_parser("p2p", help="first hit of the bisecting plane vs sin^2")
    _common(p, 10_000, 100_000)

    p = sub.add_parser("lattice-effect", help="estimate the lattice-effect table")
    _common(p, 1_000, 1_000_000)
    p.add_argument("--bins", type=count, default=180)

    p = sub.add_parser("fit-b", help="fit b from >= 3 half-space comparison CSVs")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--beta0", type=float, default=None, help="initial b (default: the inputs' b)")
    p.add_argument("--p", type=float, default=None, help="hold the finite-N power fixed instead of fitting it")
    p.add_argument("--out", default=None, help="write g(theta) table here")

    p = sub.add_parser("predict", help="tabulate a predicted CDF")
    p.add_argument("--kind", choices=("half", "sphere", "bisect"), required=True)
    p.add_argument("--a", type=float, default=0.75)
    p.add_argument("--b", type=float, default=B_FIT)
    p.add_argument("--theta-max", type=float, default=None, help="half-space conditioning, degrees")
    p.add_argument("--step", type=float, default=1.0, help="grid spacing, degrees")
    p.add_argument("--out", default="-")
    return parser


def _exponents(args) -> ExponentSet:
    try:
        return ExponentSet(args.nu, args.gamma, args.gamma1, args.b)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _run_meta(args, spec: RunSpec, result) -> dict:
    return {
        "command": args.command, "n_steps": spec.n_steps, "samples": spec.n_samples,
        "stride": spec.stride, "warmup": spec.warmup if spec.warmup is not None else 20 * spec.n_steps,
        "chains": spec.chains, "seed": spec.seed, "batches": spec.batches,
        "emitted": result.n_emitted, "pivot_acceptance": f"{result.acceptance:.6g}",
    }


def _exponent_comment(e: ExponentSet) -> str:
    return f"exponents nu={e.nu!r} gamma={e.gamma!r} gamma1={e.gamma1!r} b={e.b!r} p={e.p!r}"


def _spec(args, kind: str, **extra) -> RunSpec:
    try:
        return RunSpec(kind, args.n_steps, args.samples, stride=args.stride, warmup=args.warmup,
                       chains=args.chains, seed=args.seed, exponents=_exponents(args),
                       batches=args.batches, workers=args.workers, **extra)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_half(args) -> io.Table:
    if not 0 < args.theta_max < 90:
        raise ConfigError("--theta-max must lie in (0, 90) degrees")
    theta0 = np.radians(args.theta_max)
    spec = _spec(args, "half", theta_max=theta0)
    if spec.n_steps < 2:
        raise ConfigError("--n-steps must be >= 2")
    res = run(spec)
    deg = degree_grid(1.0, args.theta_max) if args.theta_max >= 1 else np.array([args.theta_max])
    if deg[-1] != args.theta_max:
        deg = np.append(deg[deg < args.theta_max], args.theta_max)
    grid = np.radians(deg)
    cdf = res.cdf(grid)
    pred = conditioned_cdf_half(grid, spec.exponents.b, theta0)
    meta = _run_meta(args, spec, res) | {"theta_max": args.theta_max}
    return io.comparison_table(deg, cdf.cdf, pred, cdf.err_2sigma, meta, [_exponent_comment(spec.exponents)])


def cmd_p2p(args) -> io.Table:
    spec = _spec(args, "p2p")
    res = run(spec)
    deg = degree_grid(0.0, 90.0)
    grid = np.radians(deg)
    cdf = res.cdf(grid)
    meta = _run_meta(args, spec, res)
    return io.comparison_table(deg, cdf.cdf, cdf_bisect(grid), cdf.err_2sigma, meta,
                               [_exponent_comment(spec.exponents)])


def cmd_sphere(args) -> io.Table:
    if not -1 < args.a < 1:
        raise ConfigError("--a must satisfy |a| < 1")
    table = None
    if args.lattice_effect_table and args.no_lattice_effect:
        raise ConfigError("give either --lattice-effect-table or --no-lattice-effect, not both")
    if args.lattice_effect_table:
        table = LatticeEffectTable.from_csv(args.lattice_effect_table)
        if table.flagged:
            raise ConfigError(f"{args.lattice_effect_table}: table has empty bins")
    elif not args.no_lattice_effect:
        raise ConfigError("sphere needs --lattice-effect-table (or --no-lattice-effect)")
    spec = _spec(args, "sphere", a=args.a)
    res = run(spec)
    deg = degree_grid(0.0, 180.0)
    grid = np.radians(deg)
    pred = cdf_sphere(grid, args.a, spec.exponents.b)
    raw = res.cdf(grid)
    meta = _run_meta(args, spec, res) | {"a": args.a}
    comments = [_exponent_comment(spec.exponents)]
    if table is None:
        return io.comparison_table(deg, raw.cdf, pred, raw.err_2sigma, meta, comments)
    meta |= {"lattice_effect_n": table.n_steps, "lattice_effect_samples": table.n_samples}
    cor = res.cdf(grid, lattice_effect=table)
    t = io.comparison_table(deg, cor.cdf, pred, cor.err_2sigma, meta, comments)
    t.columns = io.COMPARISON_COLUMNS + ("cdf_sim_uncorrected", "diff_uncorrected", "err_2sigma_uncorrected")
    t.data |= {"cdf_sim_uncorrected": raw.cdf, "diff_uncorrected": raw.cdf - pred,
               "err_2sigma_uncorrected": raw.err_2sigma}
    return t


def cmd_lattice_effect(args) -> LatticeEffectTable:
    stride = args.stride if args.stride is not None else 10
    return run_lattice_effect(args.n_steps, args.samples, bins=args.bins, stride=stride,
                              warmup=args.warmup, chains=args.chains, seed=args.seed,
                              workers=args.workers)


def cmd_fit_b(args):
    if len(args.inputs) < 3:
        raise ConfigError("fit-b needs at least three comparison CSVs")
    tables = [io.read_table(p) for p in args.inputs]
    if not io.same_grid(tables):
        raise ConfigError("input CSVs are not on identical theta grids")
    try:
        n_steps = [float(t.meta["n_steps"]) for t in tables]
    except KeyError:
        raise ConfigError("input CSV lacks n_steps metadata") from None
    theta0s = {t.meta.get("theta_max") for t in tables}
    if len(theta0s) != 1:
        raise ConfigError("inputs use different conditioning angles")
    theta0 = theta0s.pop()
    theta0 = None if theta0 is None else np.radians(float(theta0))
    beta0 = args.beta0
    if beta0 is None:
        bs = {_comment_b(t) for t in tables}
        beta0 = bs.pop() if len(bs) == 1 and None not in bs else B_FIT
    deg = tables[0]["theta_deg"]
    keep = deg < (np.degrees(theta0) if theta0 is not None else 90.0)
    try:
        fit = fit_b(n_steps, [t["cdf_sim"][keep] for t in tables], np.radians(deg[keep]), beta0, theta0,
                    p_fixed=args.p)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return fit, beta0, deg[keep]


def _comment_b(t: io.Table):
    for c in t.comments:
        if c.startswith("exponents"):
            for tok in c.split()[1:]:
                k, v = tok.split("=")
                if k == "b":
                    return float(v)
    return None


def cmd_predict(args) -> io.Table:
    kind = {"half": HALF_SPACE, "sphere": SPHERE, "bisect": BISECT}[args.kind]
    theta0 = None if args.theta_max is None else np.radians(args.theta_max)
    pred = PredictedCdf(kind, b=args.b, a=args.a, theta0=theta0)
    top = np.degrees(pred.domain_max)
    deg = degree_grid(0.0, top, args.step)
    if kind == HALF_SPACE and theta0 is None:
        deg = deg[deg < 90.0]
    if deg[-1] < top and not (kind == HALF_SPACE and theta0 is None):
        deg = np.append(deg, top)
    try:
        values = pred(np.radians(deg))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    meta = {"command": "predict", "kind": args.kind, "b": args.b}
    if kind == SPHERE:
        meta["a"] = args.a
    if theta0 is not None:
        meta["theta_max"] = args.theta_max
    return io.Table(("theta_deg", "cdf_pred"), {"theta_deg": deg, "cdf_pred": values}, meta)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "lattice-effect":
            table = cmd_lattice_effect(args)
            comment = (f"command=lattice-effect stride={args.stride or 10} chains={args.chains} "
                       f"seed={args.seed}")
            if args.out in (None, "-"):
                print(table.to_text((comment,)), end="")
            else:
                table.to_csv(args.out, comments=(comment,))
            if table.flagged:
                print("warning: some lattice-effect bins are empty", file=sys.stderr)
            return 0
        if args.command == "fit-b":
            fit, beta0, deg = cmd_fit_b(args)
            print(f"b = {fit.b:.6f}  (beta0 = {beta0}, epsilon = {fit.epsilon:.3e})")
            print(f"p_fit = {fit.p_fit:.4f}" + ("  (fixed)" if args.p is not None else ""))
            if fit.p_at_bound:
                print("warning: p_fit sits on the search bracket; the inputs do not determine p "
                      "(try more samples, a wider N range, or --p)", file=sys.stderr)
            print(f"residual = {fit.residual_norm:.3e}")
            if args.out:
                io.write_table(args.out, io.Table(("theta_deg", "g"), {"theta_deg": deg, "g": fit.g},
                                                  {"command": "fit-b", "b": f"{fit.b:.6f}",
                                                   "p_fit": f"{fit.p_fit:.6f}"}))
            return 0
        handler = {"half": cmd_half, "sphere": cmd_sphere, "p2p": cmd_p2p, "predict": cmd_predict}
        table = handler[args.command](args)
        io.write_table(args.out, table)
        if args.command != "predict" and args.out not in (None, "-"):
            summary = f"sup|diff| = {np.max(np.abs(table['diff'])):.4g}"
            if "diff_uncorrected" in table.data:
                summary += f", uncorrected {np.max(np.abs(table['diff_uncorrected'])):.4g}"
            print(summary)
        return 0
    except ConfigError as exc:
        print(f"sawlab {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
