"""Optimal trustworthy recommendation policies.

Policies are flattened row-major, so variable ``k * I + i`` is ``pi(s^k | x^i)``.
The unregularized problem is a linear program over the completely
trustworthy (CT) set.  With a finite customization level ``eta`` the
objective gains ``-KL(pi || pi_d) / eta`` and is solved through its dual,
a smooth convex program in the trust multipliers.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .belief import as_policy_array, uniform_policy
from .errors import (InfeasibleSupport, NotAligned, NotConverged, NotLinearlyDependent,
                     NumericalFailure, PreconditionViolated)
from .insider import _argmax_lowest, classify_policy
from .metrics import MetricReport, full_info_policy, isel, metric_report, zero_info_policy
from .scenario import ScenarioModel, expected_utility_bar, joint_prior
from .simplex import OPTIMAL, linprog_max

__all__ = [
    "ConstraintSystem", "SolverConfig", "SolveResult", "DualSolution", "zero_info_policy",
    "full_info_policy", "ct_constraints", "solve_optimal_acel", "solve_dual_lp",
    "solve_primal_eta", "closed_form_policy", "value_bounds", "closed_form_linear_dependence",
    "aligned_optimum", "invariant_perturbation", "fit_linear_dependence",
]


# --- constraint systems ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    """``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``x >= 0`` over the K*I policy entries."""

    K: int
    I: int
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    pairs: tuple = ()  # (k, l) for each inequality row when built from utilities

    def residuals(self, pi) -> np.ndarray:
        """Slack of each inequality row; negative entries are violations."""
        return self.b_ub - self.A_ub @ as_policy_array(pi).ravel()

    def satisfied(self, pi, tol: float = 1e-9) -> bool:
        x = as_policy_array(pi).ravel()
        return bool(np.all(self.residuals(pi) >= -tol) and np.all(np.abs(self.A_eq @ x - self.b_eq) <= tol)
                    and np.all(x >= -tol))


def column_sum_rows(K: int, I: int) -> tuple[np.ndarray, np.ndarray]:
    return np.tile(np.eye(I), (1, K)), np.ones(I)


def trust_rows(m: ScenarioModel) -> tuple[np.ndarray, list]:
    """Row ``(k, l)`` holds ``b_X(x) [vbar_U(x, a^k) - vbar_U(x, a^l)]`` on the variables of row k."""
    w = joint_prior(m).b_x[:, None] * expected_utility_bar(m, "U")
    K, I = m.K, m.I
    pairs = [(k, l) for k in range(K) for l in range(K) if k != l]
    G = np.zeros((len(pairs), K * I))
    for r, (k, l) in enumerate(pairs):
        G[r, k * I:(k + 1) * I] = w[:, k] - w[:, l]
    return G, pairs


def ct_constraints(m: ScenarioModel) -> ConstraintSystem:
    G, pairs = trust_rows(m)
    A_eq, b_eq = column_sum_rows(m.K, m.I)
    return ConstraintSystem(m.K, m.I, -G, np.zeros(len(pairs)), A_eq, b_eq, tuple(pairs))


# --- configuration and results ------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    eta: float = math.inf
    default_policy: np.ndarray | None = None  # uniform when omitted
    tol: float = 1e-8
    max_iters: int = 500

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def prior_policy(self, K: int, I: int) -> np.ndarray:
        if self.default_policy is None:
            return uniform_policy(K, I)
        pi_d = as_policy_array(self.default_policy)
        if pi_d.shape != (K, I):
            raise ValueError(f"default policy has shape {pi_d.shape}, expected {(K, I)}")
        if np.any(pi_d < 0) or np.any(np.abs(pi_d.sum(axis=0) - 1) > 1e-10):
            raise ValueError("default policy must be column-stochastic")
        return pi_d


@dataclass
class SolveResult:
    policy: np.ndarray
    value: float
    dual_beta: np.ndarray
    dual_lambda: np.ndarray
    metrics: MetricReport
    eta: float = math.inf
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, np.ndarray):
                return clean(v.tolist())
            if isinstance(v, (list, tuple)):
                return [clean(u) for u in v]
            if isinstance(v, dict):
                return {k: clean(u) for k, u in v.items()}
            if isinstance(v, (float, np.floating)):
                v = float(v)
                return v if math.isfinite(v) else str(v)
            if isinstance(v, np.integer):
                return int(v)
            if isinstance(v, np.bool_):
                return bool(v)
            return v

        return clean({
            "eta": self.eta,
            "value": self.value,
            "policy": self.policy,
            "dual_beta": self.dual_beta,
            "dual_lambda": self.dual_lambda,
            "metrics": self.metrics._asdict(),
            "diagnostics": self.diagnostics,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_row(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["eta", "value", *MetricReport._fields, "policy"]
        if header:
            w.writerow(cols)
        w.writerow([f"{self.eta:.17g}", f"{self.value:.17g}", *(f"{v:.17g}" for v in self.metrics),
                    " ".join(f"{v:.17g}" for v in self.policy.ravel())])
        return buf.getvalue()


def _objective_vector(m: ScenarioModel) -> np.ndarray:
    """Coefficients ``b_X(x) vbar_D(x, a^k)`` in policy layout (K x I)."""
    return (joint_prior(m).b_x[:, None] * expected_utility_bar(m, "D")).T


def _clip_policy(x: np.ndarray, K: int, I: int) -> np.ndarray:
    pi = np.clip(x.reshape(K, I), 0.0, None)
    return pi / pi.sum(axis=0, keepdims=True)


# --- eta = infinity ---------------------------------------------------------------------


def solve_optimal_acel(m: ScenarioModel, constraints: ConstraintSystem | None = None) -> SolveResult:
    """Maximize expected security over trustworthy policies (no customization penalty).

    ``constraints`` defaults to the exact CT set; a learned system may be
    passed instead, in which case the trust multipliers are left unset.
    """
    cs = ct_constraints(m) if constraints is None else constraints
    c = _objective_vector(m).ravel()
    lp = linprog_max(c, cs.A_ub, cs.b_ub, cs.A_eq, cs.b_eq)
    if lp.status != OPTIMAL:
        raise NumericalFailure(f"trust-constrained LP ended with status {lp.status!r}")
    pi = _clip_policy(lp.x, m.K, m.I)

    lam = np.zeros((m.K, m.K))
    if constraints is None:
        for (k, l), y in zip(cs.pairs, lp.ub_duals):
            lam[k, l] = max(y, 0.0)
    beta = _beta_from_lambda(m, lam, lp.eq_duals)
    report = metric_report(m, pi)
    diag = {
        "iterations": lp.iterations,
        "lp_value": lp.value,
        "max_violation": float(max(0.0, -cs.residuals(pi).min(initial=0.0))),
        "ct": classify_policy(m, pi).label,
        "alpha": np.zeros((m.K, m.I)),
        "ub_duals": lp.ub_duals,
    }
    return SolveResult(pi, float(c @ pi.ravel()), beta, lam, report, math.inf, diag)


def _beta_from_lambda(m: ScenarioModel, lam: np.ndarray, eq_duals=None) -> np.ndarray:
    """Per-scheme dual values ``beta(x) = max_k betabar(s^k, x, lambda)``."""
    bbar = betabar(m, lam)
    beta = bbar.max(axis=0)
    b_x = joint_prior(m).b_x
    if eq_duals is not None:
        live = b_x > 0
        beta[live] = eq_duals[live] / b_x[live]
    return beta


def betabar(m: ScenarioModel, lam) -> np.ndarray:
    """K x I matrix ``vbar_D(x, a^k) + sum_l lam[k, l] (vbar_U(x, a^k) - vbar_U(x, a^l))``."""
    lam = np.asarray(lam, dtype=float)
    vD = expected_utility_bar(m, "D").T
    vU = expected_utility_bar(m, "U").T  # K x I
    lam_off = lam - np.diag(np.diag(lam))
    return vD + lam_off.sum(axis=1)[:, None] * vU - lam_off @ vU


@dataclass
class DualSolution:
    beta: np.ndarray
    lam: np.ndarray
    value: float
    iterations: int


def solve_dual_lp(m: ScenarioModel) -> DualSolution:
    """Dual of the unregularized program, solved as its own LP.

    Minimize ``sum_x b_X(x) beta(x)`` subject to ``beta(x) >= betabar(s^k, x, lam)``
    for every reachable ``x`` and every ``k``, with ``lam >= 0``.
    """
    jp = joint_prior(m)
    live = np.flatnonzero(jp.reachable)
    K = m.K
    vD = expected_utility_bar(m, "D")
    vU = expected_utility_bar(m, "U")
    pairs = [(k, l) for k in range(K) for l in range(K) if k != l]
    n_b, n_l = live.size, len(pairs)
    # variables: beta over reachable schemes (free), then lambda pairs (>= 0)
    c = np.concatenate([-jp.b_x[live], np.zeros(n_l)])
    A, b = [], []
    for r, i in enumerate(live):
        for k in range(K):
            row = np.zeros(n_b + n_l)
            row[r] = -1.0
            for p, (kk, l) in enumerate(pairs):
                if kk == k:
                    row[n_b + p] = vU[i, k] - vU[i, l]
            A.append(row)
            b.append(-vD[i, k])
    free = np.concatenate([np.ones(n_b, bool), np.zeros(n_l, bool)])
    lp = linprog_max(c, np.array(A), np.array(b), free=free)
    if lp.status != OPTIMAL:
        raise NumericalFailure(f"dual LP ended with status {lp.status!r}")
    lam = np.zeros((K, K))
    for p, (k, l) in enumerate(pairs):
        lam[k, l] = max(lp.x[n_b + p], 0.0)
    beta = betabar(m, lam).max(axis=0)
    beta[live] = lp.x[:n_b]
    return DualSolution(beta, lam, -lp.value, lp.iterations)


# --- finite eta -----------------------------------------------------------------------


def forced_zero_mask(m: ScenarioModel, pi_d: np.ndarray, constraints: ConstraintSystem | None = None,
                     tol: float = 1e-10) -> np.ndarray:
    """Entries that vanish on every trustworthy policy supported inside ``pi_d``'s support."""
    cs = ct_constraints(m) if constraints is None else constraints
    K, I = m.K, m.I
    zero = (pi_d <= 0).ravel()
    pin_rows = np.eye(K * I)[zero]
    A_eq = np.vstack([cs.A_eq, pin_rows])
    b_eq = np.concatenate([cs.b_eq, np.zeros(pin_rows.shape[0])])
    forced = zero.copy()
    known_positive = np.zeros(K * I, bool)
    for e in range(K * I):
        if forced[e] or known_positive[e]:
            continue
        c = np.zeros(K * I)
        c[e] = 1.0
        lp = linprog_max(c, cs.A_ub, cs.b_ub, A_eq, b_eq)
        if lp.status != OPTIMAL:
            raise InfeasibleSupport("no trustworthy policy lies inside the default policy's support")
        if lp.value <= tol:
            forced[e] = True
        known_positive |= lp.x > tol
    return forced.reshape(K, I)


class _Dual:
    """``eta`` times the dual function, written in ``mu = eta * lambda``."""

    def __init__(self, m: ScenarioModel, pi_d: np.ndarray, support: np.ndarray, eta: float):
        G, self.pairs = trust_rows(m)
        self.K, self.I = m.K, m.I
        self.E = G.reshape(len(self.pairs), m.K, m.I)  # pair -> K x I, nonzero on row k only
        self.row_of = np.array([k for k, _ in self.pairs], dtype=int)
        with np.errstate(divide="ignore"):
            self.base = np.where(support, np.log(np.where(support, pi_d, 1.0)), -np.inf) + eta * _objective_vector(m)
        self.same_row = self.row_of[:, None] == self.row_of[None, :]

    def scores(self, mu):
        return self.base + np.tensordot(mu, self.E, axes=1)

    def value(self, mu) -> float:
        return float(logsumexp(self.scores(mu), axis=0).sum())

    def evaluate(self, mu):
        Z = self.scores(mu)
        lse = logsumexp(Z, axis=0)
        p = np.exp(Z - lse)
        e = self.E[np.arange(len(self.pairs)), self.row_of]  # P x I
        pe = p[self.row_of] * e
        grad = pe.sum(axis=1)
        hess = self.same_row * (pe @ e.T) - pe @ pe.T
        return float(lse.sum()), grad, hess, p, lse


def _projected_gradient(mu, g):
    return np.where(mu > 0, g, np.minimum(g, 0.0))


def _minimize_dual(dual: _Dual, mu0: np.ndarray, tol: float, max_iters: int):
    mu = mu0.copy()
    scale = max(1.0, np.abs(dual.E).max(initial=0.0))
    gtol = 1e-13 * scale
    H, g, hess, p, lse = dual.evaluate(mu)
    it = 0
    status = "max_iters"
    for it in range(1, max_iters + 1):
        pg = _projected_gradient(mu, g)
        if np.abs(pg).max(initial=0.0) <= gtol:
            status = "converged"
            break
        eps = min(1e-9, float(np.abs(pg).max()))
        active = (mu <= eps) & (g > 0)
        free = ~active
        d = np.zeros_like(mu)
        d[active] = -mu[active]  # snap bound-active multipliers to zero
        if free.any():
            Hf = hess[np.ix_(free, free)]
            ridge = 1e-14 * (1.0 + np.trace(Hf))
            for _ in range(30):
                try:
                    d_f = np.linalg.solve(Hf + ridge * np.eye(Hf.shape[0]), -g[free])
                except np.linalg.LinAlgError:
                    d_f = None
                if d_f is not None and g[free] @ d_f < 0:
                    break
                ridge *= 100.0
            else:
                d_f = -g[free]
            d[free] = d_f
        t, accepted = 1.0, False
        while t > 1e-18:
            trial = np.maximum(mu + t * d, 0.0)
            H_t = dual.value(trial)
            if H_t <= H + 1e-4 * (g @ (trial - mu)):
                accepted = True
                break
            if abs(H_t - H) <= 4e-16 * max(1.0, abs(H)):
                # below floating resolution of the objective; fall back on the gradient
                H_n, g_n, *_ = dual.evaluate(trial)
                if np.abs(_projected_gradient(trial, g_n)).max(initial=0.0) < np.abs(pg).max():
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            status = "stalled"
            break
        mu = trial
        H, g, hess, p, lse = dual.evaluate(mu)
    pg_norm = float(np.abs(_projected_gradient(mu, g)).max(initial=0.0))
    if status != "converged" and pg_norm <= tol:
        status = "converged"
    return mu, status, it, pg_norm


def solve_primal_eta(m: ScenarioModel, cfg: SolverConfig) -> SolveResult:
    """Maximize expected security minus ``KL(pi || pi_d) / eta`` over trustworthy policies.

    Works on the dual: for multipliers ``lam >= 0`` the best policy has the
    closed form of :func:`closed_form_policy`, and the dual function is a
    sum of scaled log-sum-exps that is minimized by projected Newton steps.
    Entries that no trustworthy policy inside ``pi_d``'s support can use are
    removed first so that the dual minimum is attained.
    """
    if math.isinf(cfg.eta):
        return solve_optimal_acel(m)
    K, I = m.K, m.I
    eta = float(cfg.eta)
    pi_d = cfg.prior_policy(K, I)
    forced = forced_zero_mask(m, pi_d)
    support = ~forced
    dual = _Dual(m, pi_d, support, eta)
    P = len(dual.pairs)

    starts = [np.zeros(P)]
    if P:
        lp = solve_optimal_acel(m)
        lam_lp = np.array([lp.dual_lambda[k, l] for k, l in dual.pairs])
        lam_lp[lam_lp < 1e-12 * max(1.0, lam_lp.max())] = 0.0
        starts.append(eta * lam_lp)
    mu0 = min(starts, key=dual.value)
    mu, status, iters, pg_norm = _minimize_dual(dual, mu0, cfg.tol, cfg.max_iters)

    H, g, _, p, lse = dual.evaluate(mu)
    pi = np.where(support, p, 0.0)
    lam = np.zeros((K, K))
    for (k, l), v in zip(dual.pairs, mu / eta):
        lam[k, l] = v
    value = H / eta
    primal = primal_objective(m, pi, pi_d, eta)
    lower, upper = value_bounds(m, lam, cfg, support)
    diag = {
        "iterations": iters,
        "status": status,
        "projected_gradient": pg_norm,
        "duality_gap": value - primal,
        "primal_objective": primal,
        "bounds": (lower, upper),
        "summed_bounds": (lower, lower + I * math.log(K) / eta),
        "bound_ok": bool(lower - 1e-9 * max(1.0, abs(lower)) <= value <= upper + 1e-9 * max(1.0, abs(upper))),
        "max_violation": float(max(0.0, -g.min(initial=0.0))),
        "pinned": forced,
        "ct": classify_policy(m, pi).label,
        "alpha": np.zeros((K, I)),
    }
    result = SolveResult(pi, value, (lse - 1.0) / eta, lam, metric_report(m, pi), eta, diag)
    if status != "converged":
        raise NotConverged(f"dual Newton stopped ({status}) with projected gradient {pg_norm:.3g}", result)
    return result


def primal_objective(m: ScenarioModel, pi, pi_d, eta: float) -> float:
    pi = as_policy_array(pi)
    c = _objective_vector(m)
    mask = pi > 0
    kl = float(np.sum(pi[mask] * np.log(pi[mask] / pi_d[mask])))
    return float(np.sum(c * pi)) - kl / eta


def closed_form_policy(m: ScenarioModel, lam, cfg: SolverConfig, support=None) -> np.ndarray:
    """Columnwise softmax of ``log pi_d + eta b_X(x) betabar(s^k, x, lam)`` over the support."""
    pi_d = cfg.prior_policy(m.K, m.I)
    support = pi_d > 0 if support is None else np.asarray(support, bool) & (pi_d > 0)
    Z = _support_scores(m, lam, pi_d, support, cfg.eta)
    return np.exp(Z - logsumexp(Z, axis=0))


def _support_scores(m, lam, pi_d, support, eta):
    c = joint_prior(m).b_x[None, :] * betabar(m, lam)
    with np.errstate(divide="ignore"):
        return np.where(support, np.log(np.where(support, pi_d, 1.0)) + eta * c, -np.inf)


def value_bounds(m: ScenarioModel, lam, cfg: SolverConfig, support=None) -> tuple[float, float]:
    """Bracket ``[r, r + log K / eta]`` around the dual function at ``lam``.

    Each audit scheme's log-sum-exp sits within ``log K / eta`` of its max, so
    the sum is only guaranteed within ``I log K / eta``; that wider bracket is
    reported as ``summed_bounds`` in the solver diagnostics.
    """
    pi_d = cfg.prior_policy(m.K, m.I)
    support = pi_d > 0 if support is None else np.asarray(support, bool) & (pi_d > 0)
    eta = float(cfg.eta)
    lower = float((_support_scores(m, lam, pi_d, support, eta).max(axis=0) / eta).sum())
    return lower, lower + math.log(m.K) / eta


# --- closed-form special cases -------------------------------------------------------------


def fit_linear_dependence(m: ScenarioModel, tol: float = 1e-9):
    """Find ``(scale, translate)`` with ``v_D = scale * v_U + translate(y, x)``, or ``None``."""
    du = m.v_U - m.v_U.mean(axis=2, keepdims=True)
    dd = m.v_D - m.v_D.mean(axis=2, keepdims=True)
    denom = float(np.sum(du * du))
    scale = float(np.sum(du * dd) / denom) if denom > 0 else 0.0
    translate = (m.v_D - scale * m.v_U).mean(axis=2)
    resid = np.abs(scale * m.v_U + translate[..., None] - m.v_D).max(initial=0.0)
    if resid > tol * max(1.0, np.abs(m.v_D).max(initial=0.0)):
        return None
    return scale, translate


@dataclass
class LinearDependenceOptimum:
    acel: float
    optimal_policy_kind: str
    policy: np.ndarray


def closed_form_linear_dependence(m: ScenarioModel, rho_sa: float, rho_tr) -> LinearDependenceOptimum:
    """Optimal ACEL when the defender's objective is an affine image of the insider's utility."""
    rho_tr = np.broadcast_to(np.asarray(rho_tr, dtype=float), (m.J, m.I))
    resid = np.abs(rho_sa * m.v_U + rho_tr[..., None] - m.v_D).max(initial=0.0)
    if resid > 1e-9 * max(1.0, np.abs(m.v_D).max(initial=0.0)):
        raise NotLinearlyDependent(f"v_D differs from the affine image by {resid:.3g}")
    if rho_sa <= 0:
        return LinearDependenceOptimum(0.0, "zero_info", zero_info_policy(m))
    b_x = joint_prior(m).b_x
    vU = expected_utility_bar(m, "U")
    gap = float(b_x @ vU.max(axis=1) - (b_x @ vU).max())
    return LinearDependenceOptimum(rho_sa * gap, "full_info", full_info_policy(m))


@dataclass
class AlignedOptimum:
    asel: float
    offsets: np.ndarray  # delta(x)
    insider_optimum: float  # sum_x b_X(x) max_a vbar_U(x, a)


def aligned_optimum(m: ScenarioModel, tol: float = 1e-12) -> AlignedOptimum:
    """Optimal security level when both players share a best action at every ``(y, x)``."""
    top_U = m.v_U >= m.v_U.max(axis=2, keepdims=True) - tol
    top_D = m.v_D >= m.v_D.max(axis=2, keepdims=True) - tol
    if not np.all((top_U & top_D).any(axis=2)):
        raise NotAligned("some (y, x) has no action optimal for both players")
    b_x = joint_prior(m).b_x
    vU = expected_utility_bar(m, "U")
    vD = expected_utility_bar(m, "D")
    a_max = np.array([_argmax_lowest(row) for row in vU])
    rows = np.arange(m.I)
    delta = vU[rows, a_max] - vD[rows, a_max]
    best_U = float(b_x @ vU[rows, a_max])
    return AlignedOptimum(best_U - float(b_x @ delta), delta, best_U)


def invariant_perturbation(m: ScenarioModel, decrement: float = 1.0) -> np.ndarray:
    """Lower ``v_D`` at other schemes' least-secure actions.

    For every ``y`` and pair of schemes ``x^i != x^j`` whose least-secure
    actions differ, ``v_D(y, x^j, a^min(y, x^i))`` drops by ``decrement``
    (once per entry).  Requires ``v_D`` to be a negatively scaled affine image
    of ``v_U``.
    """
    fit = fit_linear_dependence(m)
    if fit is None:
        raise PreconditionViolated("v_D is not an affine image of v_U")
    if m.K > 1 and np.ptp(m.v_U, axis=2).max() > 0 and fit[0] >= 0:
        raise PreconditionViolated(f"scale {fit[0]:.3g} is not negative")
    a_min = np.argmin(m.v_D, axis=2)  # (y, x), lowest index on ties
    eligible = np.zeros(m.v_D.shape, bool)
    for y in range(m.J):
        for i in range(m.I):
            for j in range(m.I):
                if j != i and a_min[y, j] != a_min[y, i]:
                    eligible[y, j, a_min[y, i]] = True
    return m.v_D - decrement * eligible


def optimal_asel(m: ScenarioModel) -> float:
    return solve_optimal_acel(m).value


def optimal_acel(m: ScenarioModel) -> float:
    return solve_optimal_acel(m).value - isel(m)
