"""Head-on collapse of two unit masses and the five collision-rate ratios.

Run: python demos/kepler_collapse.py
"""

import numpy as np

from nbcollide.asymptotics import verify_collision_rates
from nbcollide.scenarios import preset, run_scenario

run = run_scenario(preset("kepler_pair"))
tr = run.trajectory
print(f"status {tr.status}, {len(tr)} samples, final r_G / r_G(0) = {float(tr.r_G()[-1] / tr.r_G()[0]):.2e}")

rep = verify_collision_rates(tr, A_reference=run.scenario.A_reference, window=(1e-8, 1e-5))
print(f"T = {rep.T:.12f}  (closed form pi / sqrt 2 = {np.pi / np.sqrt(2):.12f})")
print(f"A = {rep.A_hat:.8f}  (closed form 9^(2/3) / 2 = {9 ** (2 / 3) / 2:.8f})")
for name, chk in rep.ratio_checks.items():
    print(f"  {name:20s} worst relative deviation {chk.max_rel_dev:.2e}")
