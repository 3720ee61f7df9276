"""Restricted isometry estimates and the recovery-error constant bundle.

Reproduces the reference constant pair (16.97, 3.00), shows the relation
between the plain and B-norm isometry constants, the isometry-gap
crossover, and emits a constant-versus-RIC curve.
"""

import numpy as np

from tfsr import bounds, frames

# the reference operating point: c1 = 0.75, M = 6s, c2 = 0.234, delta = 0.56
bc = bounds.bound_constants(1, 6, 0.56, 0.75, 0.234)
print(f"reference bundle: K1={bc.K1:.5f} K2={bc.K2:.5f} "
      f"-> error <= {bc.eps_coeff:.2f} eps + {bc.eta_coeff:.2f} eta")
opt = bounds.optimize_constants(1, 6, 0.56)
print(f"grid-optimized  : c1={opt.c1:.3f} c2={opt.c2:.3f} "
      f"-> error <= {opt.eps_coeff:.2f} eps + {opt.eta_coeff:.2f} eta\n")

# exact isometry constants on a small ensemble
op = frames.generate_sensing(6, 12, "gaussian", seed=5)
plain = bounds.ric_exact(op.A, 2)
bnorm = bounds.ric_bnorm(op, 2)
mapped = bounds.delta_hat_from_delta(plain.delta, op.spec_norm_sq)
print(f"delta_2 = {plain.delta:.4f}   delta_hat_2 = {bnorm.delta:.4f}   "
      f"upper bound 1-(1-delta)/||A||^2 = {mapped:.4f}")
print(f"isometry-gap crossover at delta = "
      f"{bounds.gap_crossover(op.spec_norm_sq):.4f} "
      f"(above it the B-norm gap is smaller)\n")

# sparsity-order lemmas, verified by enumeration
report = bounds.lemma_checks(op, s=2, p_values=(2, 3))
print(f"||A||^2 = {report['spec_norm_sq']:.3f} > 1: "
      f"{report['spec_norm_sq_gt_1']}")
for chk in report["order_checks"]:
    print(f"delta_hat_{chk['p'] * chk['s']} = {chk['delta_hat_ps']:.4f} "
          f"<= {chk['p']} * delta_hat_{2 * chk['s']} = {chk['bound']:.4f}: "
          f"{chk['pass']}")

# constant curves against the B-norm RIC
rows, meta = bounds.constants_curves(0.5, np.linspace(0.05, 0.9, 12), 6,
                                     x_axis="delta_hat")
print(f"\nconstant curve ({meta['axis_label']} axis):")
for r in rows:
    tail = (f"C0 = {r['c0_tf']:7.2f}  C1 = {r['c1_tf']:7.2f}"
            if r["valid"] else "infeasible")
    print(f"  delta_hat = {r['delta_hat']:.3f}  {tail}")
