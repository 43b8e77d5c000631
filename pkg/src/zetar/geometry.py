"""Trusted regions of the policy hypercube as convex polytopes.

A point ``p`` of the k-th hypercube stands for the k-th row of a policy.
The k-th recommendation is trusted iff ``p . (w_k - w_l) >= 0`` for every
``l != k``, where ``w_a = b_X * vbar_U(., a)``.
"""
from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .belief import ZERO_SIGNAL, as_policy_array
from .errors import DegenerateFace, DimensionTooLarge
from .insider import best_response, classify_policy, weighted_utility
from .scenario import ScenarioModel, joint_prior

MEMBER_TOL = 1e-9
DEDUP_TOL = 1e-7
MAX_HULL_DIM = 4


@dataclass
class PolytopeVRep:
    dim: int
    vertices: np.ndarray
    notes: list = field(default_factory=list)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, self.dim)
        self.vertices = dedup_points(v)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "vertices": self.vertices.tolist(), "notes": list(self.notes)}


@dataclass
class PolytopeHRep:
    """``{p : normals @ p >= offsets, eq_normals @ p == eq_offsets}``."""

    dim: int
    normals: np.ndarray
    offsets: np.ndarray
    eq_normals: np.ndarray | None = None
    eq_offsets: np.ndarray | None = None

    def __post_init__(self):
        self.normals = np.asarray(self.normals, dtype=float).reshape(-1, self.dim)
        self.offsets = np.asarray(self.offsets, dtype=float).ravel()
        if self.eq_normals is None:
            self.eq_normals = np.zeros((0, self.dim))
            self.eq_offsets = np.zeros(0)
        self.eq_normals = np.asarray(self.eq_normals, dtype=float).reshape(-1, self.dim)
        self.eq_offsets = np.asarray(self.eq_offsets, dtype=float).ravel()

    @property
    def inequalities(self) -> list:
        return list(zip(self.normals, self.offsets))

    @property
    def lower_dimensional(self) -> bool:
        return self.eq_normals.shape[0] > 0

    def contains(self, p, tol: float = MEMBER_TOL) -> bool:
        p = np.asarray(p, dtype=float)
        ok = np.all(self.normals @ p >= self.offsets - tol)
        return bool(ok and np.all(np.abs(self.eq_normals @ p - self.eq_offsets) <= tol))

    def with_box(self) -> "PolytopeHRep":
        eye = np.eye(self.dim)
        return PolytopeHRep(self.dim, np.vstack([self.normals, eye, -eye]),
                            np.concatenate([self.offsets, np.zeros(self.dim), -np.ones(self.dim)]),
                            self.eq_normals, self.eq_offsets)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "inequalities": [{"normal": n.tolist(), "offset": float(o)} for n, o in self.inequalities],
            "equalities": [{"normal": n.tolist(), "offset": float(o)} for n, o in zip(self.eq_normals, self.eq_offsets)],
        }


def dedup_points(points: np.ndarray, tol: float = DEDUP_TOL) -> np.ndarray:
    kept = []
    for p in points:
        if not any(np.abs(p - q).max() <= tol for q in kept):
            kept.append(p)
    return np.array(kept).reshape(-1, points.shape[1]) if kept else points[:0]


def cube_vertices(I: int) -> np.ndarray:
    return np.array(list(itertools.product((0.0, 1.0), repeat=I)))


# --- analytic regions --------------------------------------------------------------------


def trust_normals(m: ScenarioModel, k: int) -> np.ndarray:
    """Rows ``w_k - w_l`` for ``l != k``; the k-th region is where all are nonnegative on ``p``."""
    w = weighted_utility(m, "U")
    return np.array([w[:, k] - w[:, l] for l in range(m.K) if l != k]).reshape(-1, m.I)


def pt_halfspaces(m: ScenarioModel, k: int) -> PolytopeHRep:
    n = trust_normals(m, k)
    return PolytopeHRep(m.I, n, np.zeros(n.shape[0])).with_box()


def _trusted_point(normals: np.ndarray, p: np.ndarray, tol: float = MEMBER_TOL) -> bool:
    return bool(np.all(normals @ p >= -tol))


def pt_edge_vertices(m: ScenarioModel, k: int) -> PolytopeVRep:
    """PT cube vertices plus the crossings on edges whose endpoints disagree."""
    normals = trust_normals(m, k)
    V = cube_vertices(m.I)
    inside = [_trusted_point(normals, v) for v in V]
    points = [v for v, ok in zip(V, inside) if ok]
    notes = []
    for a, b in itertools.combinations(range(len(V)), 2):
        diff = V[b] - V[a]
        if np.abs(diff).sum() != 1:
            continue
        va, vb = normals @ V[a], normals @ V[b]
        if inside[a] == inside[b]:
            if np.any((np.abs(va) <= MEMBER_TOL) & (np.abs(vb) <= MEMBER_TOL)):
                notes.append(f"edge {V[a].tolist()}-{V[b].tolist()} lies in a facet hyperplane")
            continue
        # Each inequality that changes sign along the edge contributes one crossing;
        # the one closest to the trusted endpoint bounds the region.
        src, dst, f_src, f_dst = (V[a], V[b], va, vb) if inside[a] else (V[b], V[a], vb, va)
        ts = [f_src[r] / (f_src[r] - f_dst[r]) for r in range(len(normals)) if f_dst[r] < -MEMBER_TOL]
        t = min(ts)
        points.append(src + t * (dst - src))
    return PolytopeVRep(m.I, np.array(points).reshape(-1, m.I), notes)


def enumerate_vertices(hrep: PolytopeHRep, tol: float = MEMBER_TOL) -> np.ndarray:
    """Brute-force vertex enumeration: every feasible intersection of ``dim`` tight rows."""
    A, b, d = hrep.normals, hrep.offsets, hrep.dim
    pts = []
    for rows in itertools.combinations(range(A.shape[0]), d):
        M = A[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        p = np.linalg.solve(M, b[list(rows)])
        if np.all(A @ p >= b - tol):
            pts.append(p)
    return dedup_points(np.array(pts).reshape(-1, d))


def ct_polytope_vertices(m: ScenarioModel, k: int, strict: bool = False) -> PolytopeVRep:
    """Exact vertices of the k-th trusted region.

    With two actions the region is cut by a single hyperplane and the
    vertices are found edge by edge; otherwise all tight subsets are tried.
    ``strict`` turns a hyperplane containing a whole cube edge into an error.
    """
    if m.K <= 2:
        v = pt_edge_vertices(m, k)
    else:
        v = PolytopeVRep(m.I, enumerate_vertices(pt_halfspaces(m, k)))
    if strict and v.notes:
        raise DegenerateFace("; ".join(v.notes))
    return v


# --- conversion -------------------------------------------------------------------------------


def vrep_to_hrep(v: PolytopeVRep) -> PolytopeHRep:
    """Facet description of the convex hull of ``v.vertices``.

    Lower-dimensional hulls come back with equality rows describing their
    affine hull.
    """
    d = v.dim
    if d > MAX_HULL_DIM:
        raise DimensionTooLarge(f"hull conversion supports dim <= {MAX_HULL_DIM}, got {d}")
    P = np.asarray(v.vertices, dtype=float)
    if P.shape[0] == 0:
        raise ValueError("empty vertex set")
    center = P.mean(axis=0)
    _, sv, Vt = np.linalg.svd(P - center, full_matrices=True)
    rank = int(np.sum(sv > 1e-9 * max(1.0, sv.max(initial=0.0))))
    basis, normal_space = Vt[:rank], Vt[rank:]
    eq_n = normal_space
    eq_o = normal_space @ center
    if rank == 0:
        return PolytopeHRep(d, np.zeros((0, d)), np.zeros(0), eq_n, eq_o)
    coords = (P - center) @ basis.T
    if rank == 1:
        lo, hi = coords.min(), coords.max()
        u = basis[0]
        normals = np.array([u, -u])
        offsets = np.array([lo + u @ center, -(hi + u @ center)])
    else:
        try:
            hull = ConvexHull(coords)
        except QhullError as exc:
            raise DimensionTooLarge(f"hull computation failed: {exc}") from exc
        # qhull rows read a . z + c <= 0 in projected coordinates
        a, c = hull.equations[:, :-1], hull.equations[:, -1]
        # a . U(p - center) + c <= 0  <=>  (-a U) . p >= c - a U center
        normals = -a @ basis
        offsets = c + normals @ center
        normals, offsets = _unique_rows(normals, offsets)
    return PolytopeHRep(d, normals, offsets, eq_n if rank < d else None, eq_o if rank < d else None)


def _unique_rows(normals: np.ndarray, offsets: np.ndarray):
    keep = []
    for r in range(normals.shape[0]):
        row = np.append(normals[r], offsets[r])
        if not any(np.abs(row - np.append(normals[q], offsets[q])).max() <= 1e-9 for q in keep):
            keep.append(r)
    return normals[keep], offsets[keep]


def hrep_vertices(h: PolytopeHRep) -> np.ndarray:
    """Vertices of a bounded full-dimensional H-rep (box bounds added)."""
    return enumerate_vertices(h.with_box())


# --- cells and dumps ------------------------------------------------------------------------------


def cell_of_policy(m: ScenarioModel, pi) -> tuple:
    """Action induced by each signal; ``None`` marks signals that are never sent."""
    pi = as_policy_array(pi)
    b_x = joint_prior(m).b_x
    return tuple(best_response(m, pi, s) if pi[s] @ b_x >= ZERO_SIGNAL else None for s in range(m.K))


def in_ct(hreps, pi, tol: float = MEMBER_TOL) -> bool:
    pi = as_policy_array(pi)
    return all(h.contains(pi[k], tol) for k, h in enumerate(hreps))


def square_grid(step: float = 0.05) -> np.ndarray:
    n = int(round(1.0 / step))
    return np.linspace(0.0, 1.0, n + 1)


def write_polytope_json(path, vrep: PolytopeVRep | None = None, hrep: PolytopeHRep | None = None) -> None:
    doc = {}
    if vrep is not None:
        doc.update(vrep.to_dict())
    if hrep is not None:
        doc["dim"] = hrep.dim
        doc.update({k: v for k, v in hrep.to_dict().items() if k != "dim"})
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


def write_grid_membership_csv(path, m: ScenarioModel, step: float = 0.05) -> None:
    """Binary-action policy square: one row per grid point with trust flags and induced cell."""
    if m.K != 2 or m.I != 2:
        raise ValueError("grid dumps cover the 2 x 2 policy square only")
    g = square_grid(step)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p1", "p2", "trusted_0", "trusted_1", "label", "cell"])
        for p1 in g:
            for p2 in g:
                pi = np.array([[p1, p2], [1 - p1, 1 - p2]])
                cls = classify_policy(m, pi)
                cell = "-".join("none" if a is None else str(a) for a in cell_of_policy(m, pi))
                w.writerow([f"{p1:.6g}", f"{p2:.6g}", int(cls.trusted[0]), int(cls.trusted[1]), cls.label, cell])
