"""Walk through the two-posture case study for the three risk attitudes.

Prints the belief threshold, the no-recommendation levels, the optimal
trustworthy policy and its gains, then shows how the threshold moves with the
incident penalty.
"""
import numpy as np

from zetar.casestudy import CaseStudyPoint, sweep
from zetar.insider import belief_threshold, initial_compliance
from zetar.optimizer import solve_optimal_acel
from zetar.scenario import ATTITUDES, REFERENCE_PARAMS

np.set_printoptions(precision=4, suppress=True)

for att in ATTITUDES:
    m = CaseStudyPoint(REFERENCE_PARAMS.with_attitude(att)).scenario()
    res = solve_optimal_acel(m)
    r = res.metrics
    print(f"== {att}")
    print(f"  belief threshold  {belief_threshold(m):.4f}")
    print(f"  initial compliance {initial_compliance(m):.4f}")
    print(f"  ISeL {r.isel:+.4f}  ASeL* {r.asel:+.4f}  ACEL* {r.acel:.6f}")
    print(f"  ISaL {r.isal:+.4f}  ASaL  {r.asal:+.4f}")
    print("  optimal policy (rows: recommend ic, co; columns: sa, ta)")
    print("  " + str(res.policy).replace("\n", "\n  "))

print("\nthreshold against the incident penalty c_D_ic")
print("c_D_ic " + " ".join(f"{a:>8}" for a in ATTITUDES))
rows = {a: sweep(CaseStudyPoint(REFERENCE_PARAMS.with_attitude(a)), "c_D_ic", range(0, 21, 4)) for a in ATTITUDES}
for i, c in enumerate(range(0, 21, 4)):
    print(f"{c:6d} " + " ".join(f"{rows[a][i]['t_bt']:8.4f}" for a in ATTITUDES))
