"""Sensing ensembles, the effective tight frame, and coherence.

Walks through what the back-projection (B-norm) machinery buys: a random
ensemble is far from tight, but measuring the residual in the B-norm is
equivalent to sensing with the Parseval-tight matrix B A.
"""

import numpy as np

from tfsr import frames, matrixlab

m, n = 64, 160
for dist in frames.DISTRIBUTIONS:
    op = frames.generate_sensing(m, n, dist, seed=11)
    e = op.b_matrix @ op.A
    print(f"{dist:10s}  ||A||^2 = {op.spec_norm_sq:6.3f}   "
          f"cond(A) = {matrixlab.restricted_cond(op.A):6.3f}   "
          f"cond(BA) = {matrixlab.restricted_cond(e):8.6f}   "
          f"||(BA)(BA)^T - I|| = {frames.effective_tightness(op):.2e}")

print()
op = frames.generate_sensing(m, n, "gaussian", seed=11)
mu = matrixlab.coherence(op.A)
print(f"coherence of A          : {mu:.4f}")
print(f"welch lower bound       : {matrixlab.welch_bound(m, n):.4f}")
print(f"coherence of B A        : {matrixlab.coherence(op.b_matrix @ op.A):.4f}")

# the B-norm of a residual equals the l2 norm of its back-projection
rng = np.random.default_rng(0)
x, y = rng.standard_normal(n), rng.standard_normal(m)
r1 = frames.bnorm_residual(op, x, y)
r2 = np.linalg.norm(op.pinv @ (op.A @ x - y))
print(f"\n||Ax-y||_B two ways     : {r1:.10f} vs {r2:.10f}")

# a Parseval-tight dictionary from equispaced rows of an orthonormal DCT
dct = frames.overcomplete_dct(n, 4 * n, seed=0)
d = dct.matrix
print(f"dictionary D D^T error  : {np.abs(d @ d.T - np.eye(n)).max():.2e}")
alpha = np.zeros(4 * n)
alpha[rng.choice(4 * n, 5, replace=False)] = rng.standard_normal(5)
xs = dct.synthesis(alpha)
coeffs = np.sort(np.abs(dct.analysis(xs)))[::-1]
print(f"5 synthesis spikes alias into {np.count_nonzero(coeffs > 1e-12)} "
      f"analysis coefficients (tail beyond 4x5: {coeffs[20:].sum():.2e})")
