"""All twelve solvers on one analysis-sparse instance.

Builds a single noisy problem and runs the baseline, tight-frame (TF), and
rescaled tight-frame (RTF) variants of ISTA, Loris, NESTA, and SFISTA on it.
"""

import time

import numpy as np

from tfsr import frames, signalgen, solvers

n, m, d = 256, 125, 1024
op = frames.generate_sensing(m, n, "gaussian", seed=1)
dct = frames.overcomplete_dct(n, d, seed=0)
inst = signalgen.make_instance(op, dct, sparsity_pct=1.5, snr_db=45.0, seed=3)
print(f"instance: {inst.support.size} active atoms, SNR {inst.snr_db} dB, "
      f"oracle radii eps_l2={inst.epsilon_l2:.3e} eps_B={inst.epsilon_b:.3e}\n")

print(f"{'method':14s} {'rsnr dB':>8s} {'iters':>6s} {'secs':>6s}")
for alg in solvers.ALGORITHMS:
    for fid in solvers.FIDELITIES:
        spec = solvers.SolverSpec(alg, fid, lam=3e-4, max_iters=1500)
        eps = inst.epsilon_l2 if fid == "ls" else inst.epsilon_b
        t0 = time.perf_counter()
        res = solvers.solve(spec, op, dct, inst.y, epsilon=eps,
                            record_trace=False)
        rsnr = signalgen.rsnr(res.x_hat, inst.x_star)
        print(f"{alg + ':' + fid:14s} {rsnr:8.2f} {res.iterations:6d} "
              f"{time.perf_counter() - t0:6.2f}")
    print()

x0 = op.A.T @ inst.y
print(f"for reference, the starting point A.T y scores "
      f"{signalgen.rsnr(x0, inst.x_star):.2f} dB")
