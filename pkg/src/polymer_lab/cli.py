"""Command-line entry point: ``polymer-lab run|shape|dp|report``."""

import argparse
import csv
import json
import logging
import sys

from .harness import ConfigError, parse_config, report, run_experiment
from .polymer_core import Variant, log_partition, log_partition_flagged, log_partition_inhom, log_point_to_line
from .sampling import Geometry, PolymerParams, SeedSpec, build_coupled_fields, build_field
from .shape_function import ShapeContext, shape_table


def _pair(text):
    try:
        i, j = (int(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected 'i,j', got {text!r}") from exc
    return i, j


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v)


def build_parser():
    ap = argparse.ArgumentParser(prog="polymer-lab", description="Log-gamma polymer experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", default="results")
    run.add_argument("--fresh", action="store_true", help="ignore records already in --out")

    sh = sub.add_parser("shape", help="tabulate g^-1, f, F and f' on a slope grid")
    sh.add_argument("action", nargs="?", choices=["table"], default="table")
    sh.add_argument("--alpha", type=float, required=True)
    sh.add_argument("--from", type=float, default=0.1, dest="x0")
    sh.add_argument("--to", type=float, default=1.0, dest="x1")
    sh.add_argument("--steps", type=int, default=9)

    dp = sub.add_parser("dp", help="log partition function on one sampled field")
    dp.add_argument("--variant", required=True, choices=[v.value for v in Variant])
    dp.add_argument("--alpha", type=float, required=True)
    dp.add_argument("--theta", type=float, default=0.0)
    dp.add_argument("--N", type=int, required=True, dest="N")
    dp.add_argument("--T", type=int, required=True, dest="T")
    dp.add_argument("--seed", type=int, default=0)
    dp.add_argument("--replica", type=int, default=0)
    dp.add_argument("--k", type=int, default=None, help="parallelogram half-width")
    dp.add_argument("--start", type=_pair, default=(1, 1), help="start site 'i,j' (default 1,1)")
    dp.add_argument("--bw-alpha0", type=float, default=None)
    dp.add_argument("--bw-alphas", type=_floats, default=())
    dp.add_argument("--bw-betas", type=_floats, default=())

    rep = sub.add_parser("report", help="re-derive summary.json from stored records")
    rep.add_argument("--in", required=True, dest="in_dir")
    return ap


def _print_summary(summary):
    for name, ok in summary["verdicts"].items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"{summary['experiment']}: {'PASS' if summary['pass'] else 'FAIL'} ({summary['records']} records)")


def _cmd_run(args):
    spec = parse_config(args.config)
    summary = run_experiment(spec, args.out, workers=args.workers, resume=not args.fresh)
    _print_summary(summary)
    return 0 if summary["pass"] else 1


def _cmd_report(args):
    summary = report(args.in_dir)
    _print_summary(summary)
    return 0 if summary["pass"] else 1


def _cmd_shape(args):
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["x", "g_inv", "f", "F", "f_prime"])
    for row in shape_table(ShapeContext(args.alpha), args.x0, args.x1, args.steps):
        w.writerow([repr(v) for v in row])
    return 0


def _cmd_dp(args):
    variant = Variant(args.variant)
    seed = SeedSpec(args.seed, args.replica)
    out = {"variant": variant.value, "alpha": args.alpha, "theta": args.theta, "N": args.N, "T": args.T, "seed": args.seed}
    if variant is Variant.POINT_TO_LINE:
        params = PolymerParams(args.alpha, bw_alpha0=args.bw_alpha0, bw_alphas=args.bw_alphas, bw_betas=args.bw_betas)
        out["log_z"] = log_point_to_line(build_field(params, Geometry.BW_TRAPEZOID, seed=seed))
    elif variant is Variant.INHOM_FULL:
        out["log_z"] = log_partition_inhom(args.alpha, args.N, args.T, args.theta, seed)
    else:
        params = PolymerParams(args.alpha, args.theta)
        i0, j0 = args.start
        full, half = build_coupled_fields(params, (min(i0, 1), args.N, min(j0, 1), args.T), seed)
        half_space = variant in (Variant.HALF, Variant.BOUNDARY)
        field = half if half_space else full
        out["start"] = [i0, j0]
        out["log_z"] = log_partition(field, variant, (i0, j0), (args.N, args.T), k=args.k)
        if variant in (Variant.HALF, Variant.FULL):
            log_in, log_touch = log_partition_flagged(field, (i0, j0), (args.N, args.T))
            out["log_in"] = log_in
            out["log_boundary" if half_space else "log_exit"] = log_touch
    print(json.dumps(out))
    return 0


_COMMANDS = {"run": _cmd_run, "shape": _cmd_shape, "dp": _cmd_dp, "report": _cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError, ArithmeticError, OSError) as exc:
        print(f"polymer-lab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
