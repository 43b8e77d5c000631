"""Game instances: security postures, audit schemes, actions and utilities.

Tensors are stored dense with index order ``(y, x, a)``: security posture,
audit scheme, action.  Signals share the action indices.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ScenarioError, SizeGuardError

SUM_TOL = 1e-12
MAX_RULES = 4


@dataclass(frozen=True, eq=False)
class ScenarioModel:
    sp_labels: tuple
    as_labels: tuple
    action_labels: tuple
    prior_y: np.ndarray
    audit_policy: np.ndarray
    v_U: np.ndarray
    v_D: np.ndarray
    case_study: "CaseStudyParams | None" = field(default=None, compare=False)

    def __post_init__(self):
        # Coerce but never reject here: validate_scenario must be able to
        # report on malformed instances.
        for name in ("prior_y", "audit_policy", "v_U", "v_D"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ("sp_labels", "as_labels", "action_labels"):
            object.__setattr__(self, name, tuple(str(s) for s in getattr(self, name)))

    @property
    def J(self) -> int:
        return len(self.sp_labels)

    @property
    def I(self) -> int:
        return len(self.as_labels)

    @property
    def K(self) -> int:
        return len(self.action_labels)

    def with_utilities(self, v_U=None, v_D=None) -> "ScenarioModel":
        return replace(
            self,
            v_U=self.v_U if v_U is None else v_U,
            v_D=self.v_D if v_D is None else v_D,
        )

    def with_prior(self, prior_y) -> "ScenarioModel":
        return replace(self, prior_y=prior_y)

    def utility(self, player: str) -> np.ndarray:
        if player == "U":
            return self.v_U
        if player == "D":
            return self.v_D
        raise ValueError(f"player must be 'U' or 'D', got {player!r}")


def validate_scenario(m: ScenarioModel) -> list[str]:
    """Return every invariant violation of ``m``; an empty list means valid."""
    out = []
    J, I, K = m.J, m.I, m.K
    for n, name in ((J, "J"), (I, "I"), (K, "K")):
        if n < 1:
            out.append(f"{name} must be >= 1 (got {n})")
    if m.prior_y.shape != (J,):
        out.append(f"prior_y has shape {m.prior_y.shape}, expected ({J},)")
    else:
        for j in np.flatnonzero(~(m.prior_y >= 0)):
            out.append(f"prior_y[{j}] = {m.prior_y[j]:g} is negative")
        s = m.prior_y.sum()
        if not abs(s - 1.0) <= SUM_TOL:
            out.append(f"prior sums to {s:.12g}")
    if m.audit_policy.shape != (J, I):
        out.append(f"audit_policy has shape {m.audit_policy.shape}, expected ({J}, {I})")
    else:
        for j, i in zip(*np.nonzero(~(m.audit_policy >= 0))):
            out.append(f"audit_policy[{j},{i}] = {m.audit_policy[j, i]:g} is negative")
        for j, i in zip(*np.nonzero(m.audit_policy > 1.0)):
            out.append(f"audit_policy[{j},{i}] = {m.audit_policy[j, i]:g} exceeds 1")
        for j, s in enumerate(m.audit_policy.sum(axis=1)):
            if not abs(s - 1.0) <= SUM_TOL:
                out.append(f"audit_policy row {j} sums to {s:.12g}")
    for name in ("v_U", "v_D"):
        v = getattr(m, name)
        if v.shape != (J, I, K):
            out.append(f"{name} has shape {v.shape}, expected ({J}, {I}, {K})")
            continue
        for idx in zip(*np.nonzero(~np.isfinite(v))):
            out.append(f"{name}{list(map(int, idx))} is not finite")
    return out


def check_scenario(m: ScenarioModel) -> ScenarioModel:
    problems = validate_scenario(m)
    if problems:
        raise ScenarioError("invalid scenario: " + "; ".join(problems))
    return m


class JointPrior(NamedTuple):
    joint: np.ndarray  # J x I, b_{Y,X}
    b_x: np.ndarray  # I
    cond: np.ndarray  # J x I, b_{Y|X}; zero columns where unreachable
    reachable: np.ndarray  # I, bool


def joint_prior(m: ScenarioModel) -> JointPrior:
    joint = m.prior_y[:, None] * m.audit_policy
    b_x = joint.sum(axis=0)
    reachable = b_x > 0
    cond = np.zeros_like(joint)
    cond[:, reachable] = joint[:, reachable] / b_x[reachable]
    return JointPrior(joint, b_x, cond, reachable)


def expected_utility_bar(m: ScenarioModel, player: str) -> np.ndarray:
    """I x K matrix of conditional expectations of ``v_p`` over SPs given the AS.

    Rows of unreachable audit schemes are zero; check ``joint_prior(m).reachable``.
    """
    cond = joint_prior(m).cond
    return np.einsum("ji,jik->ik", cond, m.utility(player))


@dataclass(frozen=True)
class RiskPerception:
    gamma_d: float = 1.0
    gamma_s: float = 1.0

    def __post_init__(self):
        if not (self.gamma_d > 0 and self.gamma_s > 0):
            raise ScenarioError(f"risk perception parameters must be positive: {self}")


IDENTITY_PERCEPTION = RiskPerception(1.0, 1.0)


def apply_cpt(v, r: RiskPerception = IDENTITY_PERCEPTION):
    """Power-curved, loss-averse value distortion; scalar in, scalar out."""
    v = np.asarray(v, dtype=float)
    gains = np.abs(v) ** r.gamma_d
    out = np.where(v >= 0, gains, -r.gamma_s * gains)
    return float(out) if out.ndim == 0 else out


def linear_transform_utility(v, scale: float, translate) -> np.ndarray:
    """``scale * v[y, x, a] + translate[y, x]``."""
    v = np.asarray(v, dtype=float)
    translate = np.broadcast_to(np.asarray(translate, dtype=float), v.shape[:2])
    return scale * v + translate[:, :, None]


# --- case study -------------------------------------------------------------

HR, LR = 0, 1  # security postures
SA, TA = 0, 1  # stringent / tolerant audit
IC, CO = 0, 1  # non-compliant / compliant action


@dataclass(frozen=True)
class CaseStudyParams:
    """Costs and rewards of the two-posture, two-audit, two-action game.

    ``c_U_hr`` and ``c_U_lr`` are the insider's intrinsic penalties for
    non-compliance; positive values describe a compliance-seeking insider,
    negative values a compliance-averse one.
    """

    c_U_co: float = 2.0
    r_D_co: float = 3.0
    c_D_ic: float = 10.0
    c_U_hr: float = 0.0
    c_U_lr: float = 0.0
    c_D_ca: float = 1.0
    r_D_ca: float = 2.0
    c_D_hr: float = 8.0
    c_D_lr: float = 2.0
    r_D_sa: float = 3.0
    risk: RiskPerception = IDENTITY_PERCEPTION

    def problems(self) -> list[str]:
        out = []
        for name in ("c_U_co", "r_D_co", "c_D_ic", "c_D_ca", "r_D_ca", "c_D_hr", "c_D_lr"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val >= 0):
                out.append(f"{name} must be a finite nonnegative number (got {val})")
        for name in ("c_U_hr", "c_U_lr", "r_D_sa"):
            if not np.isfinite(getattr(self, name)):
                out.append(f"{name} must be finite")
        return out

    def with_attitude(self, attitude: str) -> "CaseStudyParams":
        c_hr, c_lr = ATTITUDES[attitude]
        return replace(self, c_U_hr=c_hr, c_U_lr=c_lr)


# Intrinsic non-compliance penalties (c_U_hr, c_U_lr) per compliance attitude.
ATTITUDES = {
    "seeking": (2.0, 1.0),
    "neutral": (0.0, 0.0),
    "averse": (-8.0, -6.0),
}

REFERENCE_PARAMS = CaseStudyParams()
REFERENCE_PRIOR_HR = 0.2
REFERENCE_PSI_SA_HR = 0.8
REFERENCE_PSI_SA_LR = 0.3


def case_study_utilities(p: CaseStudyParams) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(v_U, v_D)`` as 2x2x2 tensors indexed ``(y, x, a)``."""
    kappa = lambda v: apply_cpt(v, p.risk)  # noqa: E731

    extrinsic = np.zeros((2, 2))  # (x, a)
    extrinsic[SA, IC] = kappa(-p.c_D_ic)
    extrinsic[SA, CO] = kappa(p.r_D_co) - p.c_U_co
    extrinsic[TA, IC] = 0.0
    extrinsic[TA, CO] = -p.c_U_co

    intrinsic = np.zeros((2, 2))  # (y, a); compliance reward calibrated to 0
    intrinsic[HR, IC] = -p.c_U_hr
    intrinsic[LR, IC] = -p.c_U_lr

    v_U = intrinsic[:, None, :] + extrinsic[None, :, :]

    v_D = np.empty((2, 2, 2))
    v_D[:, SA, IC] = p.r_D_ca - p.c_D_ca
    v_D[:, SA, CO] = -p.c_D_ca
    v_D[HR, TA, IC] = -p.c_D_hr
    v_D[LR, TA, IC] = -p.c_D_lr
    v_D[:, TA, CO] = p.r_D_sa
    return v_U, v_D


def build_case_study(
    p: CaseStudyParams = REFERENCE_PARAMS,
    prior_hr: float = REFERENCE_PRIOR_HR,
    psi_sa_hr: float = REFERENCE_PSI_SA_HR,
    psi_sa_lr: float = REFERENCE_PSI_SA_LR,
) -> ScenarioModel:
    for name, val in (("prior_hr", prior_hr), ("psi_sa_hr", psi_sa_hr), ("psi_sa_lr", psi_sa_lr)):
        if not 0.0 <= val <= 1.0:
            raise ScenarioError(f"{name} must lie in [0, 1] (got {val})")
    problems = p.problems()
    if problems:
        raise ScenarioError("; ".join(problems))
    v_U, v_D = case_study_utilities(p)
    m = ScenarioModel(
        sp_labels=("hr", "lr"),
        as_labels=("sa", "ta"),
        action_labels=("ic", "co"),
        prior_y=[prior_hr, 1.0 - prior_hr],
        audit_policy=[[psi_sa_hr, 1.0 - psi_sa_hr], [psi_sa_lr, 1.0 - psi_sa_lr]],
        v_U=v_U,
        v_D=v_D,
        case_study=p,
    )
    return check_scenario(m)


def reference_scenario(attitude: str = "averse", prior_hr: float = REFERENCE_PRIOR_HR, **overrides) -> ScenarioModel:
    """The frozen reference instance for one compliance attitude.

    Keyword overrides replace fields of :data:`REFERENCE_PARAMS`.
    """
    p = replace(REFERENCE_PARAMS.with_attitude(attitude), **overrides)
    return build_case_study(p, prior_hr)


# --- stochastic audits of critical rules -------------------------------------

RULE_STATUSES = ("f", "p", "n")  # full, partial, no compliance


def build_rule_audit_scenario(
    H: int,
    rule_scores: Sequence[Callable[[str], float]],
    joint_score: Callable[[tuple], float],
    prior_y,
    audit_policy,
    convenience=None,
    security=None,
    sp_labels=None,
) -> ScenarioModel:
    """Audit of ``H`` rules with ``H + 1`` audit schemes.

    Scheme ``x^h`` scores only rule ``h`` through ``rule_scores[h]``; scheme
    ``x^{H+1}`` scores the full compliance profile through ``joint_score``.
    The score enters the insider's utility additively on top of
    ``convenience[y, a]``.  The defender's utility is ``security[y, a]``.
    Both default to per-rule sums: the insider gains 1 for each partially
    and 2 for each non-compliant rule, the defender loses the same amounts
    scaled by ``1 + y``.
    """
    if not isinstance(H, (int, np.integer)) or H < 1:
        raise ScenarioError(f"H must be a positive integer (got {H})")
    if H > MAX_RULES:
        raise SizeGuardError(f"H = {H} gives {3 ** H} actions; at most H = {MAX_RULES} is supported")
    if len(rule_scores) != H:
        raise ScenarioError(f"need {H} per-rule scoring functions, got {len(rule_scores)}")

    prior_y = np.asarray(prior_y, dtype=float)
    audit_policy = np.asarray(audit_policy, dtype=float)
    J = prior_y.shape[0]
    profiles = list(itertools.product(RULE_STATUSES, repeat=H))
    K, I = len(profiles), H + 1

    lapse = np.array([sum({"f": 0, "p": 1, "n": 2}[o] for o in prof) for prof in profiles], dtype=float)
    if convenience is None:
        convenience = np.tile(lapse, (J, 1))
    if security is None:
        security = -np.outer(1.0 + np.arange(J), lapse)
    convenience = np.broadcast_to(np.asarray(convenience, dtype=float), (J, K))
    security = np.broadcast_to(np.asarray(security, dtype=float), (J, K))

    score = np.empty((I, K))
    for k, prof in enumerate(profiles):
        for h in range(H):
            score[h, k] = rule_scores[h](prof[h])
        score[H, k] = joint_score(prof)

    v_U = convenience[:, None, :] + score[None, :, :]
    v_D = np.broadcast_to(security[:, None, :], (J, I, K)).copy()
    m = ScenarioModel(
        sp_labels=sp_labels or tuple(f"y{j + 1}" for j in range(J)),
        as_labels=tuple(f"x{i + 1}" for i in range(I)),
        action_labels=tuple("".join(p) for p in profiles),
        prior_y=prior_y,
        audit_policy=audit_policy,
        v_U=v_U,
        v_D=v_D,
    )
    return check_scenario(m)


def random_scenario(rng: np.random.Generator, J=None, I=None, K=None, max_size=4, scale=10.0) -> ScenarioModel:
    """Random full-support instance for property tests and benchmarks."""
    J = J or int(rng.integers(1, max_size + 1))
    I = I or int(rng.integers(1, max_size + 1))
    K = K or int(rng.integers(1, max_size + 1))
    prior = rng.dirichlet(np.ones(J))
    psi = rng.dirichlet(np.ones(I), size=J)
    return ScenarioModel(
        sp_labels=[f"y{j}" for j in range(J)],
        as_labels=[f"x{i}" for i in range(I)],
        action_labels=[f"a{k}" for k in range(K)],
        prior_y=prior / prior.sum(),
        audit_policy=psi / psi.sum(axis=1, keepdims=True),
        v_U=rng.uniform(-scale, scale, size=(J, I, K)),
        v_D=rng.uniform(-scale, scale, size=(J, I, K)),
    )
