"""The insider: best responses, trust in recommendations, and the learner-facing oracle."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .belief import ZERO_SIGNAL, as_policy_array
from .errors import BudgetExceeded, NotBinaryActions, ZeroProbabilitySignal
from .scenario import ScenarioModel, expected_utility_bar, joint_prior

# Slack on the (unnormalized) trust inequalities; matches the LP feasibility tolerance.
TRUST_TOL = 1e-9
TIE_TOL = 1e-12

CT, CU, MIXED = "CT", "CU", "mixed"


def weighted_utility(m: ScenarioModel, player: str = "U") -> np.ndarray:
    """I x K matrix ``b_X(x) * vbar_p(x, a)``; its columns are the row vectors used in the trust tests."""
    return joint_prior(m).b_x[:, None] * expected_utility_bar(m, player)


def signal_scores(m: ScenarioModel, pi, s: int) -> np.ndarray:
    """Unnormalized posterior expected utility of each action given signal ``s``."""
    return as_policy_array(pi)[s] @ weighted_utility(m, "U")


def _argmax_lowest(scores: np.ndarray, tol: float = TIE_TOL) -> int:
    best = scores.max()
    return int(np.flatnonzero(scores >= best - tol * max(1.0, abs(best)))[0])


def best_response(m: ScenarioModel, pi, s: int) -> int:
    """Action taken after receiving signal ``s``.

    The insider follows the recommendation whenever the recommended action is
    a best response; otherwise ties go to the lowest action index.
    """
    pi = as_policy_array(pi)
    prob = float(pi[s] @ joint_prior(m).b_x)
    if prob < ZERO_SIGNAL:
        raise ZeroProbabilitySignal(s, prob)
    scores = pi[s] @ weighted_utility(m, "U")
    if scores[s] >= scores.max() - TRUST_TOL:
        return int(s)
    return _argmax_lowest(scores)


def induced_actions(m: ScenarioModel, pi) -> list:
    """Best response to every signal, ``None`` for signals that are never sent."""
    pi = as_policy_array(pi)
    b_x = joint_prior(m).b_x
    return [best_response(m, pi, s) if pi[s] @ b_x >= ZERO_SIGNAL else None for s in range(pi.shape[0])]


def prior_scores(m: ScenarioModel) -> np.ndarray:
    return np.einsum("j,ji,jik->k", m.prior_y, m.audit_policy, m.v_U)


def initial_compliance(m: ScenarioModel) -> int:
    """Action ``a_0`` taken without any recommendation."""
    return _argmax_lowest(prior_scores(m))


def trust_margins(m: ScenarioModel, pi) -> np.ndarray:
    """K x K matrix whose ``(k, l)`` entry is ``pi^k . (vhat^k_U - vhat^l_U)``."""
    w = weighted_utility(m, "U")  # I x K
    scores = as_policy_array(pi) @ w  # K x K: scores[k, a]
    return np.diag(scores)[:, None] - scores


def recommendation_trustworthy(m: ScenarioModel, pi, k: int, tol: float = TRUST_TOL) -> bool:
    pi = as_policy_array(pi)
    if pi[k] @ joint_prior(m).b_x < ZERO_SIGNAL:
        return True
    return bool(trust_margins(m, pi)[k].min() >= -tol)


class PolicyClass(NamedTuple):
    trusted: tuple
    label: str


def classify_policy(m: ScenarioModel, pi, tol: float = TRUST_TOL) -> PolicyClass:
    flags = tuple(recommendation_trustworthy(m, pi, k, tol) for k in range(m.K))
    if all(flags):
        label = CT
    elif not any(flags):
        label = CU
    else:
        label = MIXED
    return PolicyClass(flags, label)


# --- binary-action belief threshold -------------------------------------------


class BeliefThreshold(NamedTuple):
    t_bt: float
    t_ze: float
    f0: float  # advantage of action 0 over action 1 at b_Y(y^1) = 0
    f1: float  # same at b_Y(y^1) = 1

    def advantage(self, b: float) -> float:
        return self.f0 + b * (self.f1 - self.f0)

    def action(self, b: float) -> int:
        """Initial action at ``b_Y(y^1) = b`` under the same tie rule as :func:`initial_compliance`."""
        f = self.advantage(b)
        return 0 if f >= -TIE_TOL * max(1.0, abs(self.f0), abs(self.f1)) else 1


def compliance_threshold(m: ScenarioModel) -> BeliefThreshold:
    """Belief threshold on the probability of the first security posture.

    The prior stored in ``m`` is ignored; the family is ``b_Y = (b, 1 - b)``.
    Action 0 is the non-compliant and action 1 the compliant one.
    """
    if m.K != 2:
        raise NotBinaryActions(f"belief threshold needs K = 2 actions, got {m.K}")
    if m.J != 2:
        raise NotBinaryActions(f"belief threshold needs J = 2 security postures, got {m.J}")
    gap = m.v_U[..., 0] - m.v_U[..., 1]  # (y, x)
    per_sp = (m.audit_policy * gap).sum(axis=1)
    f1, f0 = float(per_sp[0]), float(per_sp[1])
    slope = f1 - f0
    if slope != 0:
        t_ze = -f0 / slope
    else:
        t_ze = -np.inf if f0 < 0 else np.inf
    if f0 < 0 and f1 < 0:
        t_bt = 0.0  # complies at every belief
    elif f0 > 0 and f1 > 0:
        t_bt = 1.0  # never complies, whichever side of the interval t_ze falls on
    else:
        t_bt = min(max(t_ze, 0.0), 1.0)
    return BeliefThreshold(float(t_bt), float(t_ze), f0, f1)


def belief_threshold(m: ScenarioModel) -> float:
    return compliance_threshold(m).t_bt


# --- incentive categories -------------------------------------------------------

AMENABLE, MALICIOUS, SELF_INTERESTED = "amenable", "malicious", "self-interested"


def _consistent(v_U, v_D, sign, tol) -> bool:
    du = v_U[..., :, None] - v_U[..., None, :]
    dd = sign * (v_D[..., :, None] - v_D[..., None, :])
    return bool(np.all((du < -tol) | (dd >= -tol)))


def incentive_category(m: ScenarioModel, tol: float = 1e-12) -> str:
    """Amenable when every weak preference of the insider is shared by the
    defender at each ``(y, x)``, malicious when every one is reversed.

    A defender indifferent among all actions satisfies both; amenable wins.
    """
    if _consistent(m.v_U, m.v_D, 1.0, tol):
        return AMENABLE
    if _consistent(m.v_U, m.v_D, -1.0, tol):
        return MALICIOUS
    return SELF_INTERESTED


# --- black-box oracle -----------------------------------------------------------

DIRECT, EPISODIC = "direct", "episodic"
RESAMPLE_CAP = 10_000


@dataclass
class OracleRecord:
    query: int
    k: int
    policy: tuple
    signal: int | None
    action: int | None
    draws: int


@dataclass
class InsiderOracle:
    """Answers "what does the insider do when told ``s^k`` under policy ``pi``".

    ``direct`` mode returns the best response immediately.  ``episodic`` mode
    plays whole rounds: draw an audit scheme from the prior, draw a signal
    from the policy, and repeat until ``s^k`` comes up.
    """

    scenario: ScenarioModel
    mode: str = DIRECT
    seed: int | None = 0
    resample_cap: int = RESAMPLE_CAP
    transcript: list = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in (DIRECT, EPISODIC):
            raise ValueError(f"unknown oracle mode {self.mode!r}")
        self._rng = np.random.default_rng(self.seed)
        self._b_x = joint_prior(self.scenario).b_x

    @property
    def n_schemes(self) -> int:
        return self.scenario.I

    @property
    def n_actions(self) -> int:
        return self.scenario.K

    def clone(self, seed=None) -> "InsiderOracle":
        return InsiderOracle(self.scenario, self.mode, self.seed if seed is None else seed, self.resample_cap)

    def query(self, pi, k: int):
        """Observed action after recommending ``s^k``; ``None`` if ``s^k`` is never sent."""
        pi = as_policy_array(pi)
        draws = 0
        if pi[k] @ self._b_x < ZERO_SIGNAL:
            signal = action = None
        elif self.mode == DIRECT:
            signal, action = k, best_response(self.scenario, pi, k)
        else:
            signal = None
            while signal != k:
                if draws >= self.resample_cap:
                    raise BudgetExceeded(f"s^{k} not realized in {draws} episodes")
                x = self._rng.choice(self.n_schemes, p=self._b_x)
                signal = int(self._rng.choice(self.n_actions, p=pi[:, x] / pi[:, x].sum()))
                draws += 1
            action = best_response(self.scenario, pi, signal)
        self.transcript.append(OracleRecord(len(self.transcript), k, tuple(pi.ravel()), signal, action, draws))
        return action

    def write_transcript(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["query", "k", "policy", "signal", "action", "draws"])
            for r in self.transcript:
                w.writerow([r.query, r.k, " ".join(f"{v:.17g}" for v in r.policy),
                            "" if r.signal is None else r.signal,
                            "" if r.action is None else r.action, r.draws])
