"""Central configurations of three equal masses and the homothetic Lagrange collapse.

The collapse stays on the equilateral shape; in blow-up variables it runs
into the collision restpoint v = -sqrt(2 V) with V = 3.

Run: python demos/lagrange_cc.py
"""

import numpy as np

from nbcollide.analysis import analyze_collapse
from nbcollide.cc import enumerate_cc
from nbcollide.scenarios import preset, run_scenario

# without relabelling, mirror images and body orderings count separately
for c in enumerate_cc(np.ones(3), multistart_count=64):
    (ax, ay), (bx, by) = c.normalized_q[1:] - c.normalized_q[0]
    kind = "collinear" if abs(ax * by - ay * bx) < 1e-9 else "equilateral"
    print(f"lambda = {c.lam:.12f}  {kind:11s} residual {c.residual:.1e}")

run = run_scenario(preset("lagrange_homothetic"))
an = analyze_collapse(run.trajectory, run.scenario.A_reference)
print(f"A = {an.rates.A_hat:.6f} (reference {run.scenario.A_reference:.6f})")
print(f"final v = {float(an.blowup.v[-1]):.8f}, restpoint {-np.sqrt(6):.8f}")
print(f"cc residual in the last decade: {an.rates.cc_residual_tail:.2e}")
