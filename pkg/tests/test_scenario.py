import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zetar.errors import ScenarioError, SizeGuardError
from zetar.scenario import (CaseStudyParams, RiskPerception, ScenarioModel, apply_cpt, build_case_study,
                            build_rule_audit_scenario, expected_utility_bar, joint_prior,
                            linear_transform_utility, random_scenario, reference_scenario, validate_scenario)


def tiny(prior=(0.5, 0.5), psi=((1.0, 0.0), (0.0, 1.0))):
    v = np.arange(8.0).reshape(2, 2, 2)
    return ScenarioModel(("y1", "y2"), ("x1", "x2"), ("a1", "a2"), prior, psi, v, -v)


def test_valid_model_has_no_violations():
    assert validate_scenario(tiny()) == []


def test_prior_sum_violation_is_reported_once():
    assert validate_scenario(tiny(prior=(0.5, 0.6))) == ["prior sums to 1.1"]


def test_audit_row_with_negative_entry():
    problems = validate_scenario(tiny(psi=((-0.1, 1.1), (0.5, 0.5))))
    assert len(problems) == 2
    assert "negative" in problems[0] and "exceeds 1" in problems[1]
    problems = validate_scenario(tiny(psi=((-0.1, 1.0), (0.5, 0.5))))
    assert len(problems) == 2 and "sums to" in problems[1]


def test_nonfinite_utility_is_a_violation():
    m = tiny()
    v = m.v_U.copy()
    v[0, 1, 0] = np.nan
    assert any("v_U" in p for p in validate_scenario(m.with_utilities(v_U=v)))


def test_joint_prior_case_study_marginals(averse):
    jp = joint_prior(averse)
    np.testing.assert_allclose(jp.b_x, [0.40, 0.60], atol=1e-15)
    np.testing.assert_allclose(jp.cond[0], [0.40, 1 / 15], atol=1e-15)
    np.testing.assert_allclose(jp.cond.sum(axis=0), 1.0)


def test_deterministic_audit_gives_certain_posture():
    jp = joint_prior(tiny(prior=(0.3, 0.7)))
    np.testing.assert_array_equal(jp.cond, np.eye(2))


def test_expected_utility_bar_weighted_sum(averse):
    vbar = expected_utility_bar(averse, "U")
    expect = 0.4 * averse.v_U[0, 0, 0] + 0.6 * averse.v_U[1, 0, 0]
    assert vbar[0, 0] == pytest.approx(expect, abs=1e-14)


def test_expected_utility_bar_constant_and_single_posture():
    m = tiny(prior=(0.2, 0.8), psi=((0.5, 0.5), (0.1, 0.9)))
    const = m.with_utilities(v_U=np.full((2, 2, 2), 3.5))
    np.testing.assert_allclose(expected_utility_bar(const, "U"), 3.5)
    v = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    one = ScenarioModel(("y",), ("x1", "x2"), ("a1", "a2"), [1.0], [[0.4, 0.6]], v, v)
    np.testing.assert_array_equal(expected_utility_bar(one, "D"), v[0])


def test_cpt_values():
    r = RiskPerception(0.5, 2.0)
    assert apply_cpt(4.0, r) == pytest.approx(2.0)
    assert apply_cpt(-4.0, r) == pytest.approx(-4.0)


@given(st.floats(-1e3, 1e3))
def test_cpt_identity(v):
    assert apply_cpt(v) == v


def test_linear_transform():
    v = np.array([3.0, 7.0]).reshape(1, 1, 2)
    np.testing.assert_array_equal(linear_transform_utility(v, 1.0, 0.0), v)
    out = linear_transform_utility(v, 2.0, [[5.0]])
    np.testing.assert_array_equal(out.ravel(), [11.0, 19.0])
    assert out.argmax() == v.argmax()
    assert linear_transform_utility(v, -1.0, 0.0).argmax() == 0


def test_case_study_entries():
    p = CaseStudyParams(c_U_hr=1.5)
    m = build_case_study(p)
    assert m.v_U[0, 0, 0] == pytest.approx(-p.c_U_hr - p.c_D_ic)
    np.testing.assert_allclose(m.v_U[:, 1, 1], -p.c_U_co)
    assert m.v_D[1, 1, 0] == -p.c_D_lr


def test_case_study_rejects_bad_probability():
    with pytest.raises(ScenarioError):
        build_case_study(prior_hr=1.2)
    with pytest.raises(ScenarioError):
        reference_scenario("averse", c_D_ic=-1.0)


def test_rule_audit_sizes():
    score = lambda o: {"f": 0.0, "p": -1.0, "n": -3.0}[o]  # noqa: E731
    m = build_rule_audit_scenario(1, [score], lambda prof: sum(map(score, prof)), [0.5, 0.5],
                                  [[0.5, 0.5], [0.2, 0.8]])
    assert (m.I, m.K) == (2, 3)
    m = build_rule_audit_scenario(2, [score, score], lambda prof: sum(map(score, prof)), [1.0],
                                  [[0.3, 0.3, 0.4]])
    assert m.K == 9
    with pytest.raises(SizeGuardError):
        build_rule_audit_scenario(5, [score] * 5, lambda prof: 0.0, [1.0], [[1 / 6] * 6])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_scenarios_are_valid(seed):
    m = random_scenario(np.random.default_rng(seed))
    assert validate_scenario(m) == []
    assert max(m.J, m.I, m.K) <= 4
