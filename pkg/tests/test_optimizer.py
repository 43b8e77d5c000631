import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog, minimize

from zetar.belief import policy_from_square, uniform_policy
from zetar.errors import NotAligned, NotLinearlyDependent, PreconditionViolated
from zetar.insider import CT, classify_policy
from zetar.metrics import acel, full_info_policy, isel, zero_info_policy
from zetar.optimizer import (SolverConfig, aligned_optimum, closed_form_linear_dependence, closed_form_policy,
                             ct_constraints, invariant_perturbation, optimal_asel, primal_objective,
                             solve_dual_lp, solve_optimal_acel, solve_primal_eta, value_bounds)
from zetar.scenario import ScenarioModel, expected_utility_bar, joint_prior, random_scenario, reference_scenario


def highs_optimum(m):
    """Trust-constrained LP assembled from scratch and handed to HiGHS."""
    jp = joint_prior(m)
    K, I = m.K, m.I
    wU = jp.b_x[:, None] * expected_utility_bar(m, "U")
    wD = jp.b_x[:, None] * expected_utility_bar(m, "D")
    rows = []
    for k in range(K):
        for l in range(K):
            if k != l:
                r = np.zeros((K, I))
                r[k] = -(wU[:, k] - wU[:, l])
                rows.append(r.ravel())
    A_eq = np.zeros((I, K * I))
    for i in range(I):
        A_eq[i, i::I] = 1.0
    res = linprog(-wD.T.ravel(), np.array(rows).reshape(-1, K * I) if rows else None,
                  np.zeros(len(rows)) if rows else None, A_eq, np.ones(I), bounds=(0, None), method="highs")
    assert res.status == 0
    return -res.fun


def one_action():
    v = np.array([[[2.0], [-1.0]]])
    return ScenarioModel(("y",), ("x1", "x2"), ("a",), [1.0], [[0.3, 0.7]], v, v)


def test_zero_and_full_info_are_feasible(rng):
    for _ in range(30):
        m = random_scenario(rng)
        cs = ct_constraints(m)
        assert cs.satisfied(zero_info_policy(m))
        assert cs.satisfied(full_info_policy(m))
    assert ct_constraints(one_action()).A_ub.shape[0] == 0


def test_constraints_agree_with_classification(averse):
    cs = ct_constraints(averse)
    for p1 in np.linspace(0, 1, 21):
        for p2 in np.linspace(0, 1, 21):
            pi = policy_from_square(p1, p2)
            assert cs.satisfied(pi) == (classify_policy(averse, pi).label == CT)


@pytest.mark.parametrize("attitude", ["averse", "neutral", "seeking"])
def test_lp_beats_policy_grid(attitude):
    m = reference_scenario(attitude)
    best = -np.inf
    for p1 in np.linspace(0, 1, 101):
        for p2 in np.linspace(0, 1, 101):
            pi = policy_from_square(p1, p2)
            if classify_policy(m, pi).label == CT:
                best = max(best, acel(m, pi))
    opt = solve_optimal_acel(m)
    assert best - 0.01 <= opt.metrics.acel <= best + 0.02
    assert opt.diagnostics["ct"] == CT


def test_reference_optimum(averse):
    opt = solve_optimal_acel(averse)
    assert opt.metrics.acel == pytest.approx(0.31540983606557377, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lp_matches_highs_and_dual(seed):
    m = random_scenario(np.random.default_rng(seed))
    opt = solve_optimal_acel(m)
    assert opt.value == pytest.approx(highs_optimum(m), abs=1e-8)
    assert abs(opt.value - solve_dual_lp(m).value) <= 1e-8
    assert opt.metrics.acel >= -1e-10


def test_single_action_dual():
    m = one_action()
    d = solve_dual_lp(m)
    vbar = expected_utility_bar(m, "D")[:, 0]
    np.testing.assert_allclose(d.beta, vbar)
    assert d.value == pytest.approx(joint_prior(m).b_x @ vbar)
    assert solve_optimal_acel(m).metrics.acel == 0.0


def test_amenable_and_malicious_optima(rng):
    for _ in range(20):
        m = random_scenario(rng)
        jp, vU = joint_prior(m), expected_utility_bar(m, "U")
        am = m.with_utilities(v_D=m.v_U)
        assert solve_optimal_acel(am).value == pytest.approx(jp.b_x @ vU.max(axis=1), abs=1e-9)
        assert solve_dual_lp(am).value == pytest.approx(jp.b_x @ vU.max(axis=1), abs=1e-9)
        mal = m.with_utilities(v_D=-m.v_U)
        assert solve_optimal_acel(mal).metrics.acel == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("rho", [-2.0, -1.0, 1.0, 2.0])
def test_linear_dependence_closed_form(rng, rho):
    for _ in range(10):
        m = random_scenario(rng)
        tr = rng.normal(size=(m.J, m.I))
        md = m.with_utilities(v_D=rho * m.v_U + tr[..., None])
        cf = closed_form_linear_dependence(md, rho, tr)
        assert solve_optimal_acel(md).metrics.acel == pytest.approx(cf.acel, abs=1e-8)
        assert cf.optimal_policy_kind == ("full_info" if rho > 0 else "zero_info")
        assert acel(md, cf.policy) == pytest.approx(cf.acel, abs=1e-8)


def test_linear_dependence_scales_with_slope(rng):
    m = random_scenario(rng)
    one = closed_form_linear_dependence(m.with_utilities(v_D=m.v_U), 1.0, 0.0).acel
    two = closed_form_linear_dependence(m.with_utilities(v_D=2 * m.v_U), 2.0, 0.0).acel
    assert two == pytest.approx(2 * one)
    with pytest.raises(NotLinearlyDependent):
        closed_form_linear_dependence(m.with_utilities(v_D=m.v_U ** 2 + 1), 1.0, 0.0)


def test_aligned_with_offsets_matches_lp(rng):
    for _ in range(30):
        m = random_scenario(rng)
        off = rng.normal(size=(m.J, m.I))
        ma = m.with_utilities(v_D=m.v_U + off[..., None])
        res = aligned_optimum(ma)
        assert res.asel == pytest.approx(optimal_asel(ma), abs=1e-8)
        jp = joint_prior(m)
        np.testing.assert_allclose(res.offsets[jp.reachable], -(jp.cond * off).sum(axis=0)[jp.reachable], atol=1e-12)


def test_self_alignment_has_no_offsets(rng):
    m = random_scenario(rng)
    m = m.with_utilities(v_D=m.v_U)
    np.testing.assert_allclose(aligned_optimum(m).offsets, 0.0)


def test_misaligned_pair_rejected():
    v = np.array([[[1.0, 0.0]]])
    m = ScenarioModel(("y",), ("x",), ("a1", "a2"), [1.0], [[1.0]], v, -v)
    with pytest.raises(NotAligned):
        aligned_optimum(m)


def test_aligned_optimum_breaks_with_pooled_postures():
    # Both players prefer a1 at every (y, x), yet pooling both audit schemes
    # onto one recommendation secures more than the per-scheme insider optimum.
    vU = np.array([[[3.0, 0.0], [0.0, 5.0]], [[-1.0, 0.0], [0.0, 5.0]]])
    vD = np.array([[[3.0, 0.0], [0.0, 5.0]], [[-100.0, 0.0], [0.0, 5.0]]])
    m = ScenarioModel(("y1", "y2"), ("x1", "x2"), ("a1", "a2"), [0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], vU, vD)
    assert aligned_optimum(m).asel == pytest.approx(-21.75)
    assert optimal_asel(m) == pytest.approx(2.5)


def malicious(rng):
    m = random_scenario(rng)
    tr = rng.normal(size=(m.J, m.I))
    return m.with_utilities(v_D=-rng.uniform(0.5, 2) * m.v_U + tr[..., None])


def test_perturbation_identities(rng):
    m = malicious(rng)
    np.testing.assert_array_equal(invariant_perturbation(m, 0.0), m.v_D)
    v = np.array([[[1.0, 0.0], [2.0, -1.0]]])
    same = ScenarioModel(("y",), ("x1", "x2"), ("a1", "a2"), [1.0], [[0.5, 0.5]], v, -v)
    np.testing.assert_array_equal(invariant_perturbation(same), same.v_D)
    with pytest.raises(PreconditionViolated):
        invariant_perturbation(same.with_utilities(v_D=v))


def test_perturbation_never_raises_security(rng):
    for _ in range(30):
        m = malicious(rng)
        mp = m.with_utilities(v_D=invariant_perturbation(m))
        assert np.all(mp.v_D <= m.v_D)
        assert optimal_asel(mp) <= optimal_asel(m) + 1e-9


def test_perturbation_counterexample():
    # a^min differs across schemes, and the zero-information action is
    # penalized at the other scheme, so the optimum drops
    vU = np.array([[[-2.0, -1.0], [3.0, -1.0]]])
    m = ScenarioModel(("y",), ("x1", "x2"), ("a1", "a2"), [1.0], [[0.5, 0.5]], vU, -vU)
    mp = m.with_utilities(v_D=invariant_perturbation(m))
    assert optimal_asel(m) == pytest.approx(-0.5)
    assert optimal_asel(mp) == pytest.approx(-0.625)
    assert not np.allclose(solve_optimal_acel(mp).policy, zero_info_policy(mp))


# --- finite eta ------------------------------------------------------------------------


def cvxpy_optimum(m, eta, pi_d):
    cp = pytest.importorskip("cvxpy")
    K, I = m.K, m.I
    jp = joint_prior(m)
    wU = jp.b_x[:, None] * expected_utility_bar(m, "U")
    wD = jp.b_x[:, None] * expected_utility_bar(m, "D")
    P = cp.Variable((K, I), nonneg=True)
    cons = [cp.sum(P, axis=0) == 1]
    for k in range(K):
        for l in range(K):
            if k != l:
                cons.append(P[k] @ (wU[:, k] - wU[:, l]) >= 0)
    obj = cp.sum(cp.multiply(wD.T, P)) - cp.sum(cp.rel_entr(P, pi_d)) / eta
    prob = cp.Problem(cp.Maximize(obj), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.value, P.value


def slsqp_optimum(m, eta, pi_d, starts=10, seed=0):
    """Multi-start SLSQP over the binary-action square."""
    cs = ct_constraints(m)
    rng = np.random.default_rng(seed)

    def pol(q):
        return policy_from_square(*np.clip(q, 1e-12, 1 - 1e-12))

    best = -np.inf
    for _ in range(starts):
        res = minimize(lambda q: -primal_objective(m, pol(q), pi_d, eta), rng.random(2), method="SLSQP",
                       bounds=[(0, 1)] * 2,
                       constraints=[{"type": "ineq", "fun": lambda q: cs.b_ub - cs.A_ub @ pol(q).ravel()}],
                       options={"ftol": 1e-14, "maxiter": 500})
        if res.success:
            best = max(best, -res.fun)
    return best


def test_finite_eta_matches_slsqp(averse):
    res = solve_primal_eta(averse, SolverConfig(eta=1.0))
    assert res.value == pytest.approx(slsqp_optimum(averse, 1.0, uniform_policy(2, 2)), abs=1e-7)
    assert abs(res.diagnostics["duality_gap"]) < 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.1, 1.0, 10.0]))
def test_finite_eta_matches_cvxpy(seed, eta):
    rng = np.random.default_rng(seed)
    m = random_scenario(rng, max_size=3)
    pi_d = rng.dirichlet(np.ones(m.K), size=m.I).T
    res = solve_primal_eta(m, SolverConfig(eta=eta, default_policy=pi_d))
    ref, _ = cvxpy_optimum(m, eta, pi_d)
    assert res.value == pytest.approx(ref, rel=1e-5, abs=1e-5)
    assert res.diagnostics["max_violation"] <= 1e-7


def test_closed_form_policy_round_trip(averse):
    cfg = SolverConfig(eta=1.0)
    res = solve_primal_eta(averse, cfg)
    np.testing.assert_allclose(closed_form_policy(averse, res.dual_lambda, cfg), res.policy, atol=1e-6)


def test_closed_form_policy_without_multipliers(averse):
    cfg = SolverConfig(eta=2.0)
    pi = closed_form_policy(averse, np.zeros((2, 2)), cfg)
    c = 2.0 * joint_prior(averse).b_x[None, :] * expected_utility_bar(averse, "D").T
    expect = np.exp(c) / np.exp(c).sum(axis=0)
    np.testing.assert_allclose(pi, expect)
    np.testing.assert_allclose(closed_form_policy(averse, np.zeros((2, 2)), SolverConfig(eta=1e-9)), 0.5, atol=1e-8)


def test_value_bounds(averse):
    lo, hi = value_bounds(one_action(), np.zeros((1, 1)), SolverConfig(eta=1.0))
    assert lo == hi
    res = solve_primal_eta(averse, SolverConfig(eta=1e6))
    lo, hi = res.diagnostics["bounds"]
    assert hi - lo == pytest.approx(math.log(2) / 1e6)
    res = solve_primal_eta(averse, SolverConfig(eta=1.0))
    lo, hi = res.diagnostics["bounds"]
    assert lo <= res.value <= hi
    slo, shi = res.diagnostics["summed_bounds"]
    assert shi - slo == pytest.approx(2 * math.log(2))


def test_small_eta_returns_trusted_default(averse):
    pi_d = 0.5 * zero_info_policy(averse) + 0.5 * full_info_policy(averse)
    assert classify_policy(averse, pi_d).label == CT
    res = solve_primal_eta(averse, SolverConfig(eta=1e-6, default_policy=pi_d))
    np.testing.assert_allclose(res.policy, pi_d, atol=1e-4)


def test_small_eta_moves_untrusted_default(averse):
    pi_d = uniform_policy(2, 2)
    assert classify_policy(averse, pi_d).label != CT
    res = solve_primal_eta(averse, SolverConfig(eta=1e-6, default_policy=pi_d))
    assert np.abs(res.policy - pi_d).max() > 1e-3
    assert res.diagnostics["ct"] == CT


def test_large_eta_approaches_lp(averse):
    inf = solve_optimal_acel(averse).value
    res = solve_primal_eta(averse, SolverConfig(eta=1e6))
    assert abs(res.value - inf) <= math.log(2) / 1e6 + 1e-6


def test_result_serializes(averse):
    import json
    doc = json.loads(solve_primal_eta(averse, SolverConfig(eta=1.0)).to_json())
    assert doc["eta"] == 1.0 and len(doc["policy"]) == 2
    assert json.loads(solve_optimal_acel(averse).to_json())["eta"] == "inf"
