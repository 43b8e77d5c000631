"""Learning the trusted policy set from observed insider responses.

The learner never sees utilities.  It proposes policies, recommends, and
watches whether the insider follows.  Each row of the policy matrix is
learned on its own hypercube: first the cube corners, then a bisection
along every edge that leaves the trusted region.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .belief import policy_from_row
from .errors import BudgetExceeded, OracleInconsistent
from .geometry import MAX_HULL_DIM, PolytopeHRep, PolytopeVRep, cube_vertices, vrep_to_hrep
from .insider import InsiderOracle
from .optimizer import ConstraintSystem, column_sum_rows, solve_optimal_acel

MIDPOINT, TRUSTED_END = "midpoint", "trusted_end"


@dataclass(frozen=True)
class LearnerConfig:
    epsilon: float = 1e-3
    max_queries_per_k: int | None = None  # defaults to the worst-case bound
    emit: str = MIDPOINT  # or TRUSTED_END: report the last bracket end known to be trusted

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.emit not in (MIDPOINT, TRUSTED_END):
            raise ValueError(f"unknown emit rule {self.emit!r}")

    def probes_per_edge(self) -> int:
        return math.ceil(math.log2(1.0 / self.epsilon))


def query_bound(I: int, epsilon: float) -> int:
    """Corner probes plus bisection probes over every cube edge."""
    return 2 ** (I - 1) * I * math.ceil(math.log2(1.0 / epsilon)) + 2 ** I


@dataclass
class Probe:
    k: int
    step: int
    phase: str  # "corner" or "edge"
    vertex: tuple
    coord: int | None
    point: tuple
    pt: bool
    lb: float | None
    ub: float | None


class _Counter:
    def __init__(self, oracle: InsiderOracle, k: int, cap: int, log: list):
        self.oracle, self.k, self.cap, self.log = oracle, k, cap, log
        self.count = 0

    def trusted(self, p, phase, vertex, coord=None, lb=None, ub=None) -> bool:
        if self.count >= self.cap:
            raise BudgetExceeded(f"query budget {self.cap} for s^{self.k} exhausted", partial=list(self.log))
        self.count += 1
        pi = policy_from_row(np.asarray(p, dtype=float), self.k, self.oracle.n_actions)
        action = self.oracle.query(pi, self.k)
        pt = action is None or action == self.k  # never-sent signals are vacuously followed
        self.log.append(Probe(self.k, self.count, phase, tuple(vertex), coord, tuple(map(float, p)), pt, lb, ub))
        return pt


def _cap(oracle, cfg):
    return cfg.max_queries_per_k or query_bound(oracle.n_schemes, cfg.epsilon)


def learn_pt_cube_vertices(oracle: InsiderOracle, k: int, cfg: LearnerConfig = LearnerConfig(),
                           log: list | None = None, _counter=None) -> list:
    """Corners of the k-th hypercube at which recommending ``s^k`` is followed."""
    log = [] if log is None else log
    ctr = _counter or _Counter(oracle, k, _cap(oracle, cfg), log)
    return [tuple(map(float, v)) for v in cube_vertices(oracle.n_schemes) if ctr.trusted(v, "corner", v)]


@dataclass
class EdgeSearch:
    vertex: tuple
    coord: int
    point: tuple
    probes: int
    lb: float
    ub: float


def learn_pt_polytope_vertices(oracle: InsiderOracle, k: int, corners: list, cfg: LearnerConfig = LearnerConfig(),
                               log: list | None = None, _counter=None) -> tuple[PolytopeVRep, list]:
    """Bisect every edge from a trusted corner to an untrusted neighbour.

    The bracket ``[lb, ub]`` is on the free coordinate.  When the trusted
    corner has that coordinate at 0 a trusted probe raises ``lb``; when it
    sits at 1 a trusted probe lowers ``ub``.
    """
    log = [] if log is None else log
    ctr = _counter or _Counter(oracle, k, _cap(oracle, cfg), log)
    trusted = {tuple(c) for c in corners}
    points = [np.array(c, dtype=float) for c in corners]
    searches = []
    for v in corners:
        for i in range(oracle.n_schemes):
            nb = list(v)
            nb[i] = 1.0 - nb[i]
            if tuple(nb) in trusted:
                continue
            lb, ub = 0.0, 1.0
            n_probes = 0
            while ub - lb > cfg.epsilon:
                mid = (lb + ub) / 2
                p = np.array(v, dtype=float)
                p[i] = mid
                pt = ctr.trusted(p, "edge", v, i, lb, ub)
                n_probes += 1
                if v[i] == 0:
                    lb, ub = (mid, ub) if pt else (lb, mid)
                else:
                    lb, ub = (lb, mid) if pt else (mid, ub)
            if cfg.emit == MIDPOINT:
                x = (lb + ub) / 2
            else:
                x = lb if v[i] == 0 else ub
            p = np.array(v, dtype=float)
            p[i] = x
            points.append(p)
            searches.append(EdgeSearch(tuple(v), i, tuple(p), n_probes, lb, ub))
    return PolytopeVRep(oracle.n_schemes, np.array(points).reshape(-1, oracle.n_schemes)), searches


def check_convex(dim: int, trusted, untrusted, tol: float = 1e-12) -> None:
    """No untrusted probe may lie in the convex hull of trusted ones.

    Probes on cube edges alone never trigger it: a bisection is always
    self-consistent and edges with two trusted ends are not searched.  It
    bites once extra probes (for example interior spot checks) are passed in.
    Skipped above the hull dimension limit.
    """
    if not untrusted or not trusted or dim > MAX_HULL_DIM:
        return
    hull = vrep_to_hrep(PolytopeVRep(dim, np.array(trusted, dtype=float).reshape(-1, dim)))
    for p in untrusted:
        if hull.contains(p, tol):
            raise OracleInconsistent(f"untrusted probe {tuple(map(float, p))} lies inside the trusted hull")


@dataclass
class LearnReport:
    epsilon: float
    corners: dict = field(default_factory=dict)  # k -> trusted corners
    vreps: dict = field(default_factory=dict)  # k -> PolytopeVRep
    hreps: dict = field(default_factory=dict)  # k -> PolytopeHRep
    searches: dict = field(default_factory=dict)  # k -> list of EdgeSearch
    queries: dict = field(default_factory=dict)  # k -> oracle calls
    transcript: list = field(default_factory=list)
    K: int = 0
    I: int = 0

    @property
    def bound(self) -> int:
        return query_bound(self.I, self.epsilon)

    @property
    def within_bound(self) -> bool:
        return all(q <= self.bound for q in self.queries.values())

    def constraints(self) -> ConstraintSystem:
        """Learned trusted set as linear constraints over the K*I policy entries."""
        K, I = self.K, self.I
        A_ub, b_ub, A_eq, b_eq = [], [], [], []
        for k in range(K):
            h = self.hreps[k]
            for n, o in h.inequalities:
                row = np.zeros(K * I)
                row[k * I:(k + 1) * I] = -n
                A_ub.append(row)
                b_ub.append(-o)
            for n, o in zip(h.eq_normals, h.eq_offsets):
                row = np.zeros(K * I)
                row[k * I:(k + 1) * I] = n
                A_eq.append(row)
                b_eq.append(o)
        cols, ones = column_sum_rows(K, I)
        A_eq = np.vstack([cols, *(np.atleast_2d(r) for r in A_eq)]) if A_eq else cols
        b_eq = np.concatenate([ones, b_eq])
        return ConstraintSystem(K, I, np.array(A_ub).reshape(-1, K * I), np.array(b_ub), A_eq, b_eq)

    def square_point(self, probe: Probe) -> tuple:
        """Probe location as ``pi(s^1 | .)``, the coordinates of the binary-action policy square."""
        if self.K != 2 or probe.k == 0:
            return probe.point
        return tuple(1.0 - x for x in probe.point)

    def write_transcript(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "step", "phase", "vertex", "coord", "point", "square_point", "pt", "lb", "ub"])
            for p in self.transcript:
                w.writerow([p.k, p.step, p.phase, " ".join(f"{x:g}" for x in p.vertex),
                            "" if p.coord is None else p.coord,
                            " ".join(f"{x:.17g}" for x in p.point),
                            " ".join(f"{x:.17g}" for x in self.square_point(p)), int(p.pt),
                            "" if p.lb is None else f"{p.lb:.17g}", "" if p.ub is None else f"{p.ub:.17g}"])

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "K": self.K,
            "I": self.I,
            "query_bound": self.bound,
            "within_bound": self.within_bound,
            "per_k": [
                {
                    "k": k,
                    "corners": [list(c) for c in self.corners[k]],
                    "vertices": self.vreps[k].vertices.tolist(),
                    "hrep": self.hreps[k].to_dict(),
                    "queries": self.queries[k],
                    "edges": [{"vertex": list(s.vertex), "coord": s.coord, "point": list(s.point),
                               "probes": s.probes, "lb": s.lb, "ub": s.ub} for s in self.searches[k]],
                }
                for k in range(self.K)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def learn_pt_region(oracle: InsiderOracle, k: int, cfg: LearnerConfig, log: list):
    ctr = _Counter(oracle, k, _cap(oracle, cfg), log)
    corners = learn_pt_cube_vertices(oracle, k, cfg, log, ctr)
    vrep, searches = learn_pt_polytope_vertices(oracle, k, corners, cfg, log, ctr)
    check_convex(oracle.n_schemes, [p.point for p in log if p.pt], [p.point for p in log if not p.pt])
    return corners, vrep, searches, ctr.count


def learn_ct_set(oracle: InsiderOracle, cfg: LearnerConfig = LearnerConfig()) -> LearnReport:
    """Learn every trusted region independently and convert each to half-spaces."""
    rep = LearnReport(cfg.epsilon, K=oracle.n_actions, I=oracle.n_schemes)
    for k in range(oracle.n_actions):
        log: list = []
        try:
            corners, vrep, searches, count = learn_pt_region(oracle, k, cfg, log)
        except BudgetExceeded as exc:
            rep.transcript.extend(log)
            exc.partial = rep
            raise
        rep.corners[k], rep.vreps[k], rep.searches[k], rep.queries[k] = corners, vrep, searches, count
        rep.hreps[k] = _hull_with_box(vrep)
        rep.transcript.extend(log)
    return rep


def _hull_with_box(vrep: PolytopeVRep) -> PolytopeHRep:
    return vrep_to_hrep(vrep).with_box()


@dataclass
class LearnedOptimum:
    result: object  # SolveResult over the learned constraints
    planned_acel: float  # objective value, as if every recommendation were followed
    realized_acel: float  # with the insider's actual responses


def learned_optimum(m, rep: LearnReport) -> LearnedOptimum:
    """Solve over the learned trusted set and score the result both ways."""
    res = solve_optimal_acel(m, rep.constraints())
    return LearnedOptimum(res, res.value - res.metrics.isel, res.metrics.acel)
