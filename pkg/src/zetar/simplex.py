"""Dense two-phase tableau simplex with Bland's rule.

Meant for the small linear programs of this package (tens of variables).
Determinism matters more than speed here: Bland's rule never cycles and
always visits vertices in the same order for the same input.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import NumericalFailure

OPTIMAL, INFEASIBLE, UNBOUNDED, ITERATION_LIMIT = "optimal", "infeasible", "unbounded", "iteration_limit"


class LPResult(NamedTuple):
    status: str
    x: np.ndarray | None
    value: float
    eq_duals: np.ndarray | None  # one multiplier per equality row
    ub_duals: np.ndarray | None  # one multiplier per <= row, all >= 0 for a maximization
    iterations: int


def _pivot(T: np.ndarray, r: int, j: int) -> None:
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run(T, basis, cost, n_cols, allowed, tol, max_iters, it):
    """Maximize ``cost . x`` from a feasible basis; columns outside ``allowed`` never enter."""
    m = T.shape[0]
    while True:
        if it >= max_iters:
            return ITERATION_LIMIT, it
        reduced = cost[:n_cols] - cost[basis] @ T[:, :n_cols]
        candidates = np.flatnonzero((reduced > tol) & allowed)
        if candidates.size == 0:
            return OPTIMAL, it
        j = candidates[0]
        col = T[:, j]
        rows = np.flatnonzero(col > tol)
        if rows.size == 0:
            return UNBOUNDED, it
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        r = ties[np.argmin([basis[t] for t in ties])] if m else None
        _pivot(T, r, j)
        basis[r] = j
        it += 1


def linprog_max(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, free=None, tol=1e-10, max_iters=50_000) -> LPResult:
    """Maximize ``c . x`` s.t. ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``x >= 0``.

    Variables flagged in the boolean mask ``free`` are unrestricted in sign.
    Duals satisfy ``c = A_eq' y_eq + A_ub' y_ub - (reduced costs)`` with
    ``y_ub >= 0``.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    free = np.zeros(n, bool) if free is None else np.asarray(free, bool)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]

    # Split free variables as x = x+ - x-; the extra columns come last.
    free_idx = np.flatnonzero(free)
    split = lambda A: np.hstack([A, -A[:, free_idx]])  # noqa: E731
    c_s = np.concatenate([c, -c[free_idx]])
    n_s = c_s.size

    A = np.vstack([np.hstack([split(A_ub), np.eye(m_ub)]),
                   np.hstack([split(A_eq), np.zeros((m_eq, m_ub))])])
    b = np.concatenate([b_ub, b_eq])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign
    m, n_struct = A.shape
    cost = np.concatenate([c_s, np.zeros(m_ub)])

    # Phase 1 with one artificial per row.
    T = np.hstack([A, np.eye(m), b[:, None]])
    basis = list(range(n_struct, n_struct + m))
    n_cols = n_struct + m
    phase1 = np.concatenate([np.zeros(n_struct), -np.ones(m)])
    allowed = np.ones(n_cols, bool)
    status, it = _run(T, basis, phase1, n_cols, allowed, tol, max_iters, 0)
    if status == ITERATION_LIMIT:
        return LPResult(status, None, np.nan, None, None, it)
    scale = max(1.0, np.abs(b).max(initial=0.0))
    if T[:, -1] @ (phase1[basis] * -1.0) > 1e-9 * scale:
        return LPResult(INFEASIBLE, None, np.nan, None, None, it)

    # Drive artificials out of the basis; drop rows that are redundant.
    keep = np.ones(m, bool)
    for r in range(m):
        if basis[r] >= n_struct:
            nz = np.flatnonzero(np.abs(T[r, :n_struct]) > 1e-9)
            if nz.size:
                _pivot(T, r, nz[0])
                basis[r] = nz[0]
            else:
                keep[r] = False
    rows = np.flatnonzero(keep)
    T = T[rows]
    basis = [basis[r] for r in rows]
    allowed[n_struct:] = False
    cost_full = np.concatenate([cost, np.zeros(m)])

    status, it = _run(T, basis, cost_full, n_cols, allowed, tol, max_iters, it)
    if status != OPTIMAL:
        return LPResult(status, None, np.nan if status != UNBOUNDED else np.inf, None, None, it)

    # Polish the basic solution and the multipliers against the original rows.
    B = A[np.ix_(rows, basis)]
    try:
        x_B = np.linalg.solve(B, b[rows])
        y_rows = np.linalg.solve(B.T, cost[basis])
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("singular final basis") from exc
    x_full = np.zeros(n_struct)
    x_full[basis] = x_B
    x_full[np.abs(x_full) < 1e-13] = 0.0
    y = np.zeros(m)
    y[rows] = y_rows
    y *= sign
    x = x_full[:n].copy()
    x[free_idx] -= x_full[n:n_s]
    return LPResult(OPTIMAL, x, float(c @ x), y[m_ub:], y[:m_ub], it)
