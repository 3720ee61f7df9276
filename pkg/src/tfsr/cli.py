"""Command-line interface.

Subcommands: gen-matrix, gen-dict, solve, bench, ric, bounds, whiteness,
report. Every failure exits nonzero after printing a machine-readable error
JSON to stderr.
"""

import argparse
import csv
import json
import sys

import numpy as np

from . import bench, bounds, fileio, frames, signalgen, solvers


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        json.dump({"error": "usage", "detail": message}, sys.stderr)
        sys.stderr.write("\n")
        sys.exit(2)


def _cmd_gen_matrix(args):
    op = frames.generate_sensing(args.m, args.n, args.dist, args.seed)
    frames.save_operator(op, args.out, with_derived=not args.no_derived)
    print(json.dumps({"out": args.out, "m": op.m, "n": op.n,
                      "spec_norm_sq": op.spec_norm_sq}))


def _cmd_gen_dict(args):
    dct = frames.overcomplete_dct(args.n, args.d, args.seed)
    frames.save_dictionary(dct, args.out)
    if args.dense:
        fileio.write_matrix(args.dense, dct.matrix)
    print(json.dumps({"out": args.out, "n": dct.n, "d": dct.d}))


def _load_problem(args):
    op = frames.load_operator(args.operator)
    if args.dict:
        dct = frames.load_dictionary(args.dict)
    else:
        dct = frames.IdentityDictionary(op.n)
    return op, dct


def _cmd_solve(args):
    op, dct = _load_problem(args)
    y = fileio.read_vector(args.y)
    spec = solvers.SolverSpec(
        algorithm=args.alg, fidelity=args.fidelity, lam=args.lam,
        eta=args.eta, mu=args.mu, epsilon=args.epsilon,
        max_iters=args.max_iters, tol=args.tol)
    result = solvers.solve(spec, op, dct, y, record_trace=args.trace)
    if args.xstar:
        result.rsnr_db = signalgen.rsnr(result.x_hat, fileio.read_vector(args.xstar))
    payload = solvers.result_to_json(spec, result, include_trace=args.trace)
    if args.out:
        fileio.write_json(args.out, payload)
        fileio.write_vector(args.out + ".xhat.mat", result.x_hat)
    print(json.dumps(payload))


def _cmd_bench(args):
    config = bench.load_config(args.config)
    if args.output_dir:
        config.output_dir = args.output_dir
    progress = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    report = bench.run_benchmark(config, progress=progress)
    path = bench.write_report(report)
    failed = [c for c in report.cells if c.get("failed")]
    print(json.dumps({"csv": path, "config_hash": report.config_hash,
                      "cells": len(report.cells), "failed_cells": len(failed),
                      "runtime_s": report.runtime_s}))


def _cmd_ric(args):
    a = fileio.read_matrix(args.matrix)
    if args.bnorm or args.dict:
        op = frames.SensingOperator(a, require_unit_columns=False)
    if args.dict:
        dct = frames.load_dictionary(args.dict)
        est = bounds.dric_estimate(op, dct, args.s, method=args.method,
                                   trials=args.trials, seed=args.seed,
                                   norm_kind="bnorm" if args.bnorm else "l2",
                                   cap=args.cap)
    elif args.bnorm:
        est = bounds.ric_bnorm(op, args.s, method=args.method,
                               trials=args.trials, seed=args.seed, cap=args.cap)
    elif args.method == "exact_enumeration":
        est = bounds.ric_exact(a, args.s, cap=args.cap)
    else:
        est = bounds.ric_mc(a, args.s, trials=args.trials, seed=args.seed)
    print(json.dumps(vars(est)))


def _cmd_bounds(args):
    if args.curves:
        deltas = np.linspace(args.delta_min, args.delta_max, args.delta_count)
        rows, meta = bounds.constants_curves(args.compression, deltas,
                                             args.m_over_s, x_axis=args.x_axis)
        if args.baseline:
            rows = bounds.overlay_baseline_curves(rows, args.baseline)
        if args.out:
            with open(args.out, "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
                writer.writeheader()
                writer.writerows(rows)
        print(json.dumps({"meta": meta, "rows": len(rows),
                          "valid_rows": sum(r["valid"] for r in rows)}))
        return
    if args.optimize:
        bc = bounds.optimize_constants(args.s, args.M, args.delta_hat)
    else:
        bc = bounds.bound_constants(args.s, args.M, args.delta_hat,
                                    args.c1, args.c2)
    print(json.dumps(vars(bc)))


def _cmd_whiteness(args):
    op = frames.load_operator(args.operator)
    alg, _, fid = (args.solver or "ista:tf").partition(":")
    spec = solvers.SolverSpec(algorithm=alg, fidelity=fid or "tf",
                              lam=args.lam, max_iters=args.max_iters)
    report = bounds.residual_whiteness(op, None, spec, args.snr, args.trials,
                                       args.seed, isotropic=args.isotropic)
    print(json.dumps(report))


def _cmd_report(args):
    rows = bench.merge_reports(args.inputs)
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(bench.CSV_COLUMNS),
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    print(json.dumps({"out": args.out, "rows": len(rows)}))


def build_parser():
    parser = _Parser(prog="tfsr",
                     description="Tight-frame analysis-sparse recovery toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-matrix", help="generate a sensing matrix")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dist", default="gaussian", choices=frames.DISTRIBUTIONS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--no-derived", action="store_true",
                   help="skip writing the pseudoinverse / diagonal companions")
    p.set_defaults(func=_cmd_gen_matrix)

    p = sub.add_parser("gen-dict", help="generate an undersampled DCT dictionary")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--dense", help="also write the dense matrix here")
    p.set_defaults(func=_cmd_gen_dict)

    p = sub.add_parser("solve", help="run one solver on one measurement")
    p.add_argument("--operator", required=True)
    p.add_argument("--dict")
    p.add_argument("--y", required=True)
    p.add_argument("--alg", required=True, choices=solvers.ALGORITHMS)
    p.add_argument("--fidelity", required=True, choices=solvers.FIDELITIES)
    p.add_argument("--lambda", dest="lam", type=float, default=0.01)
    p.add_argument("--eta", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--xstar", help="ground truth vector for RSNR")
    p.add_argument("--trace", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("bench", help="run a benchmark config")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("ric", help="restricted isometry constant estimation")
    p.add_argument("--matrix", required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--method", default="exact_enumeration",
                   choices=("exact_enumeration", "monte_carlo"))
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=bounds.ENUMERATION_CAP)
    p.add_argument("--bnorm", action="store_true")
    p.add_argument("--dict", help="dictionary JSON for D-RIP estimates")
    p.set_defaults(func=_cmd_ric)

    p = sub.add_parser("bounds", help="recovery-bound constants and curves")
    p.add_argument("--s", type=int, default=1)
    p.add_argument("--M", type=int, default=6)
    p.add_argument("--delta-hat", type=float, default=0.56)
    p.add_argument("--c1", type=float, default=0.75)
    p.add_argument("--c2", type=float, default=0.234)
    p.add_argument("--optimize", action="store_true")
    p.add_argument("--curves", action="store_true")
    p.add_argument("--compression", type=float, default=0.5)
    p.add_argument("--m-over-s", type=int, default=6)
    p.add_argument("--x-axis", default="delta", choices=("delta", "delta_hat"))
    p.add_argument("--delta-min", type=float, default=0.02)
    p.add_argument("--delta-max", type=float, default=0.9)
    p.add_argument("--delta-count", type=int, default=45)
    p.add_argument("--baseline",
                   help="CSV of externally supplied baseline constants "
                        "(columns delta, c0, c1) to overlay on the curves")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("whiteness", help="residual whiteness report")
    p.add_argument("--operator", required=True)
    p.add_argument("--snr", type=float, default=30.0)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--solver", help="alg:fidelity (default ista:tf)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.01)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--isotropic", action="store_true",
                   help="bypass the solver with isotropic errors")
    p.set_defaults(func=_cmd_whiteness)

    p = sub.add_parser("report", help="merge benchmark CSV reports")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        json.dump({"error": type(exc).__name__, "detail": str(exc)},
                  sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
