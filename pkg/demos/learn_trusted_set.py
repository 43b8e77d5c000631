"""Learn the trusted policy set of the averse insider from yes/no responses.

The learner never sees the insider's utilities.  It probes policies, records
whether each recommendation would be followed, and rebuilds the trusted set
from those answers.  The learned set is then used to pick a policy.
"""
import numpy as np

from zetar.geometry import ct_polytope_vertices
from zetar.insider import InsiderOracle
from zetar.learner import LearnerConfig, learn_ct_set, learned_optimum
from zetar.optimizer import solve_optimal_acel
from zetar.scenario import reference_scenario

m = reference_scenario("averse")
for eps in (1e-1, 1e-2, 1e-3, 1e-4):
    rep = learn_ct_set(InsiderOracle(m), LearnerConfig(eps))
    err = max(np.abs(rep.vreps[k].vertices - v).max(axis=1).min()
              for k in range(m.K) for v in ct_polytope_vertices(m, k).vertices)
    opt = learned_optimum(m, rep)
    print(f"eps={eps:g}: queries {sum(rep.queries.values()):3d}  vertex error {err:.1e}  "
          f"planned ACEL {opt.planned_acel:.6f}  realized ACEL {opt.realized_acel:.6f}")

print(f"analytic ACEL* {solve_optimal_acel(m).metrics.acel:.6f}")

rep = learn_ct_set(InsiderOracle(m), LearnerConfig(1e-3))
print("\nfirst probes on the co row along the (0, w) edge of the policy square")
for p in [p for p in rep.transcript if p.k == 1 and p.phase == "edge" and rep.square_point(p)[0] == 0.0][:6]:
    print(f"  w = {rep.square_point(p)[1]:.6f}  trusted: {p.pt}")
