"""Isolating-segment checks: the linear saddle and the Lagrange restpoint.

Run: python demos/segment_check.py
"""

from nbcollide.analysis import analyze_collapse, restpoint_segment
from nbcollide.scenarios import preset, run_scenario
from nbcollide.segment import linear_saddle_selftest

st = linear_saddle_selftest()
print(f"linear saddle: verified={st['report'].verified}, closed-form deviation {st['closed_form_deviation']:.1e}")

run = run_scenario(preset("lagrange_in_4body"))
an = analyze_collapse(run.trajectory, run.scenario.A_reference)
cone, rep = restpoint_segment(an.blowup, an.perturbation, R=1e-2)
print(f"cone constants at R = 1e-2: mu_arrow {cone.mu_arrow:.4f}, xi_arrow {cone.xi_arrow:.4f}, holds {cone.holds}")
print(f"segment verified={rep.verified}: min exit margin {rep.min_exit_margin:.2e}, "
      f"max entry margin {rep.max_entry_margin:.2e}")
