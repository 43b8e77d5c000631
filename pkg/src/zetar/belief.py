"""Posterior beliefs induced by a recommendation policy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ScenarioError, ZeroProbabilitySignal
from .scenario import ScenarioModel, joint_prior

COLUMN_TOL = 1e-10
# Signals less likely than this are treated as never sent.
ZERO_SIGNAL = 1e-14


@dataclass(frozen=True, eq=False)
class PolicyMatrix:
    """K x I column-stochastic matrix; entry ``(k, i)`` is ``pi(s^k | x^i)``."""

    pi: np.ndarray

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float)
        if pi.ndim != 2:
            raise ScenarioError(f"policy must be a K x I matrix, got shape {pi.shape}")
        if np.any(pi < -COLUMN_TOL) or np.any(pi > 1 + COLUMN_TOL):
            raise ScenarioError("policy entries must lie in [0, 1]")
        sums = pi.sum(axis=0)
        if np.any(np.abs(sums - 1.0) > COLUMN_TOL):
            raise ScenarioError(f"policy columns must sum to 1 (got {sums})")
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)

    def __array__(self, dtype=None, copy=None):
        return self.pi if dtype is None else self.pi.astype(dtype)

    @property
    def shape(self):
        return self.pi.shape

    def row(self, k: int) -> np.ndarray:
        return self.pi[k]


def as_policy_array(pi) -> np.ndarray:
    return np.asarray(pi, dtype=float)


def uniform_policy(K: int, I: int) -> np.ndarray:
    return np.full((K, I), 1.0 / K)


def policy_from_row(p, k: int, K: int) -> np.ndarray:
    """A policy whose k-th row is ``p``; other rows share each column's residual mass evenly."""
    p = np.asarray(p, dtype=float)
    if K == 1:
        return p[None, :].copy()
    pi = np.tile((1.0 - p) / (K - 1), (K, 1))
    pi[k] = p
    return pi


def policy_from_square(p1: float, p2: float) -> np.ndarray:
    """Binary-action policy from ``(pi(s^1|x^1), pi(s^1|x^2))``."""
    return np.array([[p1, p2], [1.0 - p1, 1.0 - p2]])


@dataclass(frozen=True, eq=False)
class Posterior:
    joint: np.ndarray
    marg_x: np.ndarray
    marg_y: np.ndarray
    cond_y_given_x: np.ndarray
    signal_prob: float


def signal_marginal(m: ScenarioModel, pi) -> np.ndarray:
    """Probability of each signal, ``sum_x b_X(x) pi(s|x)``."""
    return as_policy_array(pi) @ joint_prior(m).b_x


def posterior(m: ScenarioModel, pi, s: int) -> Posterior:
    pi = as_policy_array(pi)
    jp = joint_prior(m)
    prob = float(pi[s] @ jp.b_x)
    if prob < ZERO_SIGNAL:
        raise ZeroProbabilitySignal(s, prob)
    joint = jp.joint * pi[s][None, :] / prob
    marg_x = joint.sum(axis=0)
    marg_y = joint.sum(axis=1)
    cond = np.zeros_like(joint)
    live = marg_x > 0
    cond[:, live] = joint[:, live] / marg_x[live]
    return Posterior(joint, marg_x, marg_y, cond, prob)
