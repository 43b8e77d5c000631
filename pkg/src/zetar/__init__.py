"""Optimal trustworthy recommendation policies that raise insider compliance."""

__version__ = "0.1.0"

from .belief import PolicyMatrix, posterior, signal_marginal, uniform_policy  # noqa: E402
from .errors import *  # noqa: E402,F401,F403
from .geometry import (PolytopeHRep, PolytopeVRep, cell_of_policy, ct_polytope_vertices,  # noqa: E402
                       pt_halfspaces, vrep_to_hrep)
from .insider import (InsiderOracle, belief_threshold, best_response, classify_policy,  # noqa: E402
                      compliance_threshold, incentive_category, initial_compliance, recommendation_trustworthy)
from .io import load_policy, load_scenario, save_scenario, scenario_from_dict, scenario_to_dict  # noqa: E402
from .learner import LearnedOptimum, LearnerConfig, LearnReport, learn_ct_set, learned_optimum, query_bound  # noqa: E402
from .metrics import (MetricReport, acel, asal, asel, full_info_policy, isal, isel, metric_report,  # noqa: E402
                      zero_info_policy)
from .optimizer import (SolverConfig, SolveResult, aligned_optimum, closed_form_linear_dependence,  # noqa: E402
                        ct_constraints, invariant_perturbation, solve_dual_lp, solve_optimal_acel,
                        solve_primal_eta, value_bounds)
from .scenario import (CaseStudyParams, RiskPerception, ScenarioModel, build_case_study,  # noqa: E402
                       build_rule_audit_scenario, random_scenario, reference_scenario, validate_scenario)
