"""Trade-off between the optimal policy and a default policy as the customization level grows.

Small eta keeps the policy close to the default; large eta recovers the
linear-programming optimum.  The regularized policy never puts mass where the
default has none, so the uniform default is used here: a default with zeros
only reaches the best policy on its own support.
"""
import numpy as np

from zetar.belief import uniform_policy
from zetar.optimizer import SolverConfig, solve_optimal_acel, solve_primal_eta
from zetar.scenario import reference_scenario

m = reference_scenario("averse")
pi_d = uniform_policy(m.K, m.I)
lp = solve_optimal_acel(m)
print(f"LP optimum r_inf = {lp.value:.6f}, ACEL* = {lp.metrics.acel:.6f}")
print(f"{'eta':>8} {'r_eta':>10} {'ACEL':>9} {'dist to default':>16} {'dist to LP':>11}")
for eta in (1e-3, 1e-1, 1.0, 10.0, 100.0, 1e4):
    res = solve_primal_eta(m, SolverConfig(eta=eta, default_policy=pi_d))
    print(f"{eta:8g} {res.value:10.6f} {res.metrics.acel:9.6f} "
          f"{np.abs(res.policy - pi_d).max():16.2e} {np.abs(res.policy - lp.policy).max():11.2e}")
