"""A reduced-size benchmark run through the harness.

Runs a small sparsity sweep with lambda tuning and prints the aggregated
table; the full-scale table-reproduction configs live in the acceptance
test suite and take much longer.
"""

import sys

from tfsr import bench

config = bench.BenchConfig(
    n=128, m=64, d=512,
    distribution="gaussian",
    sparsity_pcts=(1.0, 3.0, 6.0),
    snr_dbs=(40.0,),
    methods=(("ista", "ls"), ("ista", "tf"), ("loris", "rtf"),
             ("nesta", "tf")),
    n_trials=20,
    master_seed=42,
    lambda_policy="grid_tuned",
    max_iters=500,
    output_dir="demo_bench_out",
)

report = bench.run_benchmark(
    config, progress=lambda msg: print("  ..", msg, file=sys.stderr))
print(f"config hash {report.config_hash}, total {report.runtime_s:.1f}s\n")
print(f"{'method':12s} {'sparsity':>8s} {'mean rsnr':>10s} {'std':>6s} "
      f"{'lambda':>9s}")
for cell in report.cells:
    print(f"{cell['algorithm'] + ':' + cell['fidelity']:12s} "
          f"{cell['sparsity_pct']:7.1f}% {cell['mean_rsnr_db']:10.2f} "
          f"{cell['std_rsnr_db']:6.2f} {cell['lam']:9.5f}")
path = bench.write_report(report)
print(f"\nwrote {path}")
