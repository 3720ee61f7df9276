"""Benchmark harness: grid execution, lambda tuning, reporting.

A benchmark config names a sensing ensemble, a dictionary, sparsity and SNR
grids, a method selection, and a master seed. Every cell (method x fidelity
x sparsity x SNR) optionally grid-tunes the regularization weight on
validation seeds disjoint from the reporting seeds, then aggregates the
reconstruction SNR over the reporting trials.

Determinism contract: identical configs (including the master seed) produce
byte-identical CSV output regardless of the worker-thread cap. To keep that
guarantee, BLAS and FFT parallelism are pinned to one thread inside the
runner and parallelism comes only from running independent cells on an
executor; results are written in a fixed cell order with fixed float
formatting.
"""

import csv
import hashlib
import io
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import frames, signalgen, solvers

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    import contextlib

    def threadpool_limits(limits=None):
        return contextlib.nullcontext()

LAMBDA_GRID = np.logspace(-4.0, 0.0, 20)
N_VALIDATION = 10

CSV_COLUMNS = ("method", "fidelity", "sparsity_pct", "snr_db", "mean_rsnr_db",
               "std_rsnr_db", "lambda", "n_trials", "config_hash")

ALL_METHODS = tuple(
    (alg, fid) for alg in solvers.ALGORITHMS for fid in solvers.FIDELITIES
)


@dataclass
class BenchConfig:
    n: int = 1024
    m: int = 500
    d: int = 4096
    distribution: str = "gaussian"
    sparsity_pcts: tuple = (1.0,)
    snr_dbs: tuple = (30.0,)
    methods: tuple = ALL_METHODS
    n_trials: int = 100
    master_seed: int = 1
    lambda_policy: str = "grid_tuned"   # "grid_tuned" | "fixed"
    fixed_lambda: float = 0.01
    max_iters: int = 2000
    tol: float = 1e-4
    output_dir: str = "bench_out"
    store_traces: bool = False

    def __post_init__(self):
        if not (self.d >= self.n > self.m):
            raise ValueError("config requires d >= n > m")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.lambda_policy not in ("grid_tuned", "fixed"):
            raise ValueError("lambda_policy must be grid_tuned or fixed")
        if self.distribution not in frames.DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.distribution!r}")


@dataclass
class BenchReport:
    config: BenchConfig
    config_hash: str
    cells: list = field(default_factory=list)
    runtime_s: float = 0.0


def parse_method_list(text):
    """Parse ``alg:fidelity`` selections; ``all`` expands to all twelve."""
    text = text.strip()
    if text.lower() == "all":
        return ALL_METHODS
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        alg, _, fid = item.partition(":")
        alg, fid = alg.strip().lower(), fid.strip().lower()
        if alg not in solvers.ALGORITHMS or fid not in solvers.FIDELITIES:
            raise ValueError(f"bad method selector {item!r}")
        out.append((alg, fid))
    if not out:
        raise ValueError("empty method list")
    return tuple(out)


def parse_config(text):
    """Parse the flat key-value config format (lists comma separated)."""
    kv = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        kv[key] = value
    def floats(s):
        return tuple(float(v) for v in s.split(",") if v.strip())
    kwargs = {}
    for key, value in kv.items():
        if key in ("n", "m", "d", "n_trials", "master_seed", "max_iters"):
            kwargs[key] = int(value)
        elif key in ("sparsity_pcts", "snr_dbs"):
            kwargs[key] = floats(value)
        elif key == "methods":
            kwargs[key] = parse_method_list(value)
        elif key in ("fixed_lambda", "tol"):
            kwargs[key] = float(value)
        elif key == "store_traces":
            kwargs[key] = value.lower() in ("1", "true", "yes")
        elif key in ("distribution", "lambda_policy", "output_dir"):
            kwargs[key] = value
        else:
            raise ValueError(f"unknown config key {key!r}")
    return BenchConfig(**kwargs)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def config_hash(config):
    """Stable hash of the semantic config content (output_dir excluded)."""
    items = []
    for key in sorted(vars(config)):
        if key in ("output_dir", "store_traces"):
            continue
        items.append(f"{key}={getattr(config, key)!r}")
    return hashlib.sha256(";".join(items).encode()).hexdigest()[:16]


def thread_cap():
    """Worker cap from the TFSR_THREADS environment variable (0 = auto)."""
    raw = os.environ.get("TFSR_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    if cap <= 0:
        cap = os.cpu_count() or 1
    return cap


def _build_shared(config):
    op = frames.generate_sensing(
        config.m, config.n, config.distribution,
        signalgen.derive_seed(config.master_seed, "matrix",
                              config.distribution))
    dct = frames.overcomplete_dct(
        config.n, config.d, signalgen.derive_seed(config.master_seed, "dict"))
    # Warm the lazily cached operator pieces up front so worker threads only
    # read shared state.
    op.gram_eigen, op.rtf_lipschitz, op.b_matrix
    return op, dct


def _spec_for(config, alg, fid):
    return solvers.SolverSpec(algorithm=alg, fidelity=fid,
                              lam=config.fixed_lambda,
                              max_iters=config.max_iters, tol=config.tol)


def _instance_matrix(op, instances):
    y = np.stack([inst.y for inst in instances], axis=1)
    xs = np.stack([inst.x_star for inst in instances], axis=1)
    eps = np.array([inst.epsilon_b for inst in instances])
    eps_l2 = np.array([inst.epsilon_l2 for inst in instances])
    return y, xs, eps, eps_l2


def _rsnr_cols(x_hat, x_star):
    err = np.linalg.norm(x_hat - x_star, axis=0)
    ref = np.linalg.norm(x_star, axis=0)
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(ref / err)


def run_cell(op, dct, spec, instances, lam_policy="grid_tuned",
             fixed_lambda=0.01, validation=None, lambda_grid=LAMBDA_GRID):
    """Execute one benchmark cell; returns a result dict.

    Tuning runs every (validation seed, lambda) pair as one batched solve;
    reporting runs all trials at the chosen lambda.
    """
    t0 = time.perf_counter()
    out = {"algorithm": spec.algorithm, "fidelity": spec.fidelity}
    if lam_policy == "grid_tuned":
        if not validation:
            raise ValueError("grid tuning requires validation instances")
        lam, curve = tune_lambda(op, dct, spec, validation, lambda_grid)
        out["validation_curve"] = curve
    else:
        lam = fixed_lambda
    y, xs, eps_b, eps_l2 = _instance_matrix(op, instances)
    eps = eps_l2 if spec.fidelity == "ls" else eps_b
    x_hat, iters, conv, div, _ = solvers.solve_batch(
        spec, op, dct, y, lam=lam, epsilon=eps)
    if div.any():
        out.update(failed=True, diverged_trials=int(div.sum()), lam=lam,
                   eta=solvers.default_eta(spec, op))
        return out
    vals = _rsnr_cols(x_hat, xs)
    out.update(
        failed=False,
        lam=float(lam),
        mean_rsnr_db=float(np.mean(vals)),
        std_rsnr_db=float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0,
        n_trials=len(instances),
        mean_iterations=float(np.mean(iters)),
        converged_frac=float(np.mean(conv)),
        runtime_s=time.perf_counter() - t0,
    )
    return out


def tune_lambda(op, dct, spec, validation, lambda_grid=LAMBDA_GRID):
    """Pick the grid lambda maximizing mean validation RSNR.

    Ties break toward the larger lambda (stronger regularization). Raises
    when every grid point diverges.
    """
    y, xs, eps_b, eps_l2 = _instance_matrix(op, validation)
    n_seeds = y.shape[1]
    grid = np.asarray(lambda_grid, dtype=np.float64)
    y_all = np.tile(y, len(grid))
    xs_all = np.tile(xs, len(grid))
    eps = eps_l2 if spec.fidelity == "ls" else eps_b
    eps_all = np.tile(eps, len(grid))
    lam_all = np.repeat(grid, n_seeds)
    x_hat, _, _, div, _ = solvers.solve_batch(
        spec, op, dct, y_all, lam=lam_all, epsilon=eps_all)
    vals = _rsnr_cols(x_hat, xs_all).reshape(len(grid), n_seeds)
    ok = ~div.reshape(len(grid), n_seeds).any(axis=1)
    if not ok.any():
        raise solvers.DivergenceError(
            spec.eta, "every lambda grid point diverged during tuning")
    means = np.where(ok, vals.mean(axis=1), -np.inf)
    best = means.max()
    idx = int(np.flatnonzero(means >= best - 1e-12)[-1])
    curve = [{"lambda": float(g), "mean_rsnr_db": float(v)}
             for g, v in zip(grid, means)]
    return float(grid[idx]), curve


def run_benchmark(config, progress=None):
    """Run every cell of the config; returns a :class:`BenchReport`.

    Cells execute on a thread pool capped by ``TFSR_THREADS``; the report
    and CSV rows follow the fixed (sparsity, snr, method) grid order no
    matter how execution interleaves.
    """
    t0 = time.perf_counter()
    chash = config_hash(config)
    op, dct = _build_shared(config)
    grid = [(sp, snr, alg, fid)
            for sp in config.sparsity_pcts
            for snr in config.snr_dbs
            for alg, fid in config.methods]

    # Validation seeds and reporting seeds come from disjoint derivation
    # roles, so the tuning trials never leak into the report.
    instances_cache = {}

    def instances_for(sp, snr):
        if (sp, snr) not in instances_cache:
            rep_seed = signalgen.derive_seed(config.master_seed, "report",
                                             int(sp * 1000), int(snr * 1000))
            val_seed = signalgen.derive_seed(config.master_seed, "validate",
                                             int(sp * 1000), int(snr * 1000))
            instances_cache[(sp, snr)] = (
                signalgen.batch_instances(op, dct, sp, snr, config.n_trials,
                                          rep_seed),
                signalgen.batch_instances(op, dct, sp, snr, N_VALIDATION,
                                          val_seed),
            )
        return instances_cache[(sp, snr)]

    for sp, snr, _, _ in grid:
        instances_for(sp, snr)

    def work(item):
        sp, snr, alg, fid = item
        reporting, validation = instances_for(sp, snr)
        spec = _spec_for(config, alg, fid)
        with threadpool_limits(limits=1):
            try:
                cell = run_cell(op, dct, spec, reporting,
                                lam_policy=config.lambda_policy,
                                fixed_lambda=config.fixed_lambda,
                                validation=validation)
            except solvers.DivergenceError as exc:
                cell = {"algorithm": alg, "fidelity": fid, "failed": True,
                        "error": str(exc)}
        cell.update(sparsity_pct=sp, snr_db=snr)
        if progress:
            progress(f"cell {alg}:{fid} sparsity={sp}% snr={snr}dB done "
                     f"({cell.get('runtime_s', 0.0):.1f}s)")
        return cell

    workers = min(thread_cap(), len(grid)) or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        cells = list(pool.map(work, grid))

    report = BenchReport(config=config, config_hash=chash, cells=cells,
                         runtime_s=time.perf_counter() - t0)
    return report


def report_csv_text(report):
    """Render the fixed-column CSV with stable float formatting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for cell in report.cells:
        if cell.get("failed"):
            continue
        writer.writerow([
            cell["algorithm"], cell["fidelity"],
            f"{cell['sparsity_pct']:g}", f"{cell['snr_db']:g}",
            f"{cell['mean_rsnr_db']:.6f}", f"{cell['std_rsnr_db']:.6f}",
            f"{cell['lam']:.10g}", cell["n_trials"], report.config_hash,
        ])
    return buf.getvalue()


def write_report(report, output_dir=None):
    """Write CSV + JSON into the output directory; returns the CSV path."""
    from . import fileio

    outdir = output_dir or report.config.output_dir
    os.makedirs(outdir, exist_ok=True)
    csv_path = os.path.join(outdir, "report.csv")
    with open(csv_path, "w", newline="") as fh:
        fh.write(report_csv_text(report))
    cells = []
    for cell in report.cells:
        clean = {k: v for k, v in cell.items() if k != "validation_curve"}
        cells.append(clean)
    fileio.write_json(os.path.join(outdir, "report.json"), {
        "config_hash": report.config_hash,
        "config": {k: list(v) if isinstance(v, tuple) else v
                   for k, v in vars(report.config).items()},
        "runtime_s": report.runtime_s,
        "cells": cells,
    })
    return csv_path


def merge_reports(csv_paths):
    """Merge CSV report rows; refuses rows with differing config hashes."""
    rows = []
    hashes = set()
    for path in csv_paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames) != CSV_COLUMNS:
                raise ValueError(f"{path}: unexpected CSV columns")
            for row in reader:
                hashes.add(row["config_hash"])
                rows.append(row)
    if len(hashes) > 1:
        raise ValueError(f"refusing to merge rows with differing config "
                         f"hashes: {sorted(hashes)}")
    rows.sort(key=lambda r: (float(r["sparsity_pct"]), float(r["snr_db"]),
                             r["method"], r["fidelity"]))
    return rows
