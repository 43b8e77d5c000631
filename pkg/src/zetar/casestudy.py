"""Sweeps over the two-posture case study and the bundle of tables behind its figures."""
from __future__ import annotations

import csv
import os
from dataclasses import fields, replace

import numpy as np

from .geometry import (cell_of_policy, ct_polytope_vertices, vrep_to_hrep, write_grid_membership_csv,
                       write_polytope_json)
from .insider import InsiderOracle, belief_threshold, classify_policy, initial_compliance
from .learner import LearnerConfig, learn_ct_set
from .metrics import metric_report, zero_info_policy
from .optimizer import solve_optimal_acel
from .scenario import (ATTITUDES, REFERENCE_PARAMS, REFERENCE_PRIOR_HR, REFERENCE_PSI_SA_HR, REFERENCE_PSI_SA_LR,
                       CaseStudyParams, RiskPerception, ScenarioModel, build_case_study)

PROB_PARAMS = ("prior_hr", "psi_sa_hr", "psi_sa_lr")
RISK_PARAMS = ("gamma_d", "gamma_s")
COST_PARAMS = tuple(f.name for f in fields(CaseStudyParams) if f.name != "risk")
SWEEP_PARAMS = PROB_PARAMS + RISK_PARAMS + COST_PARAMS

SWEEP_COLUMNS = ["param", "value", "t_bt", "a0", "isel", "asel_opt", "acel_opt", "pi_ic_sa", "pi_ic_ta",
                 "isal", "asal_opt", "zero_info"]


class CaseStudyPoint:
    """Case-study parameters plus the three probabilities that set the prior and the audit policy."""

    def __init__(self, params: CaseStudyParams = REFERENCE_PARAMS, prior_hr: float = REFERENCE_PRIOR_HR,
                 psi_sa_hr: float = REFERENCE_PSI_SA_HR, psi_sa_lr: float = REFERENCE_PSI_SA_LR):
        self.params, self.prior_hr, self.psi_sa_hr, self.psi_sa_lr = params, prior_hr, psi_sa_hr, psi_sa_lr

    @classmethod
    def from_scenario(cls, m: ScenarioModel) -> "CaseStudyPoint":
        if m.case_study is None:
            raise ValueError("scenario has no case_study block")
        return cls(m.case_study, float(m.prior_y[0]), float(m.audit_policy[0, 0]), float(m.audit_policy[1, 0]))

    def with_param(self, name: str, value: float) -> "CaseStudyPoint":
        if name in PROB_PARAMS:
            kw = {"prior_hr": self.prior_hr, "psi_sa_hr": self.psi_sa_hr, "psi_sa_lr": self.psi_sa_lr, name: value}
            return CaseStudyPoint(self.params, **kw)
        if name in RISK_PARAMS:
            risk = replace(self.params.risk, **{name: value})
            return CaseStudyPoint(replace(self.params, risk=risk), self.prior_hr, self.psi_sa_hr, self.psi_sa_lr)
        if name in COST_PARAMS:
            return CaseStudyPoint(replace(self.params, **{name: value}), self.prior_hr, self.psi_sa_hr, self.psi_sa_lr)
        raise KeyError(name)

    def scenario(self) -> ScenarioModel:
        return build_case_study(self.params, self.prior_hr, self.psi_sa_hr, self.psi_sa_lr)


def evaluate_point(m: ScenarioModel) -> dict:
    """Threshold, initial and optimal levels, and the optimal policy of one instance."""
    opt = solve_optimal_acel(m)
    pi_z = zero_info_policy(m)
    return {
        "t_bt": belief_threshold(m),
        "a0": initial_compliance(m),
        "isel": opt.metrics.isel,
        "asel_opt": opt.metrics.asel,
        "acel_opt": opt.metrics.acel,
        "pi_ic_sa": float(opt.policy[0, 0]),
        "pi_ic_ta": float(opt.policy[0, 1]),
        "isal": opt.metrics.isal,
        "asal_opt": opt.metrics.asal,
        "zero_info": bool(np.allclose(opt.policy, pi_z, atol=1e-9)),
    }


def sweep(base: CaseStudyPoint, param: str, grid) -> list[dict]:
    if param not in SWEEP_PARAMS:
        raise KeyError(f"unknown sweep parameter {param!r}; choose from {', '.join(SWEEP_PARAMS)}")
    rows = []
    for v in grid:
        row = {"param": param, "value": float(v)}
        row.update(evaluate_point(base.with_param(param, float(v)).scenario()))
        rows.append(row)
    return rows


def policy_surface(m: ScenarioModel, step: float = 0.02) -> list[dict]:
    """Levels over the binary-action policy square ``(pi(s^1|x^1), pi(s^1|x^2))``."""
    n = int(round(1 / step))
    base = metric_report(m, zero_info_policy(m))
    rows = []
    for p1 in np.linspace(0, 1, n + 1):
        for p2 in np.linspace(0, 1, n + 1):
            pi = np.array([[p1, p2], [1 - p1, 1 - p2]])
            rep = metric_report(m, pi)
            rows.append({
                "p1": float(p1), "p2": float(p2), "asal": rep.asal, "asel": rep.asel, "acel": rep.asel - base.asel,
                "label": classify_policy(m, pi).label,
                "cell": "-".join("none" if a is None else m.action_labels[a] for a in cell_of_policy(m, pi)),
            })
    return rows


def write_rows(path, rows: list[dict], columns=None) -> None:
    columns = columns or list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in r.items()})


def parse_grid(spec: str) -> np.ndarray:
    """``start:stop:step`` (inclusive of stop) or a comma-separated list."""
    spec = spec.strip()
    if ":" in spec:
        start, stop, step = (float(s) for s in spec.split(":"))
        if step <= 0:
            raise ValueError("grid step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9))
        return np.round(start + step * np.arange(n + 1), 12)
    return np.array([float(s) for s in spec.split(",") if s.strip()])


def casestudy_bundle(out_dir, params: CaseStudyParams = REFERENCE_PARAMS, epsilon: float = 1e-3) -> list[str]:
    """Write every table of the case study; return the file names in write order."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def emit(name, rows, columns=None):
        write_rows(os.path.join(out_dir, name), rows, columns)
        written.append(name)

    base = {att: CaseStudyPoint(params.with_attitude(att)) for att in ATTITUDES}

    rows = []
    for att, pt in base.items():
        for r in sweep(pt, "c_D_ic", np.arange(0, 21, 1.0)):
            rows.append({"attitude": att, **r})
    emit("threshold_vs_penalty.csv", rows, ["attitude", *SWEEP_COLUMNS])

    rows = []
    for att, pt in base.items():
        for g in (1.0, 2.0, 3.0):
            for c in np.arange(0, 21, 1.0):
                m = pt.with_param("gamma_s", g).with_param("c_D_ic", c).scenario()
                rows.append({"attitude": att, "gamma_d": 1.0, "gamma_s": g, "c_D_ic": c, "t_bt": belief_threshold(m)})
        for g in (0.5, 1.0):
            for c in np.arange(0, 21, 1.0):
                m = pt.with_param("gamma_d", g).with_param("c_D_ic", c).scenario()
                rows.append({"attitude": att, "gamma_d": g, "gamma_s": 1.0, "c_D_ic": c, "t_bt": belief_threshold(m)})
    emit("threshold_vs_risk.csv", rows, ["attitude", "gamma_d", "gamma_s", "c_D_ic", "t_bt"])

    rows = []
    for att, pt in base.items():
        for r in sweep(pt, "prior_hr", np.round(np.arange(0, 101) / 100, 2)):
            rows.append({"attitude": att, **r})
    emit("prior_sweep.csv", rows, ["attitude", *SWEEP_COLUMNS])

    for att, pt in base.items():
        m = pt.scenario()
        emit(f"policy_surface_{att}.csv", policy_surface(m, 0.02))
        write_grid_membership_csv(os.path.join(out_dir, f"regions_{att}.csv"), m, 0.05)
        written.append(f"regions_{att}.csv")
        for k in range(m.K):
            v = ct_polytope_vertices(m, k)
            h = vrep_to_hrep(v)
            name = f"polytope_{att}_{m.action_labels[k]}.json"
            write_polytope_json(os.path.join(out_dir, name), v, h)
            written.append(name)
        if att in ("seeking", "averse"):
            rep = learn_ct_set(InsiderOracle(m), LearnerConfig(epsilon))
            rep.write_transcript(os.path.join(out_dir, f"learner_transcript_{att}.csv"))
            written.append(f"learner_transcript_{att}.csv")
    return written


def reference_point(attitude: str = "averse", **overrides) -> CaseStudyPoint:
    p = REFERENCE_PARAMS.with_attitude(attitude)
    risk = {k: overrides.pop(k) for k in RISK_PARAMS if k in overrides}
    if risk:
        p = replace(p, risk=RiskPerception(**{**vars(p.risk), **risk}))
    probs = {k: overrides.pop(k) for k in PROB_PARAMS if k in overrides}
    return CaseStudyPoint(replace(p, **overrides), **probs)
