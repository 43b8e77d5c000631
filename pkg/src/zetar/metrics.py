"""Satisfaction and security levels, and the compliance enhancement they imply."""
from __future__ import annotations

import csv
import io
from typing import NamedTuple

import numpy as np

from .belief import ZERO_SIGNAL, as_policy_array
from .insider import _argmax_lowest, best_response, initial_compliance, weighted_utility
from .scenario import ScenarioModel, expected_utility_bar, joint_prior


def zero_info_policy(m: ScenarioModel) -> np.ndarray:
    """Always recommend the action the insider would take anyway."""
    pi = np.zeros((m.K, m.I))
    pi[initial_compliance(m)] = 1.0
    return pi


def full_info_policy(m: ScenarioModel) -> np.ndarray:
    """Recommend the insider's best action for the realized audit scheme."""
    vbar = expected_utility_bar(m, "U")
    pi = np.zeros((m.K, m.I))
    for i in range(m.I):
        pi[_argmax_lowest(vbar[i]), i] = 1.0
    return pi


def _levels(m: ScenarioModel, pi) -> tuple[float, float]:
    pi = as_policy_array(pi)
    w_U = weighted_utility(m, "U")
    w_D = weighted_utility(m, "D")
    b_x = joint_prior(m).b_x
    sat = sec = 0.0
    for s in range(pi.shape[0]):
        if pi[s] @ b_x < ZERO_SIGNAL:
            continue
        a = best_response(m, pi, s)
        sat += pi[s] @ w_U[:, a]
        sec += pi[s] @ w_D[:, a]
    return float(sat), float(sec)


def asal(m: ScenarioModel, pi) -> float:
    """Insider's expected utility when acting on the recommendations of ``pi``."""
    return _levels(m, pi)[0]


def asel(m: ScenarioModel, pi) -> float:
    """Defender's expected security objective under the insider's responses to ``pi``."""
    return _levels(m, pi)[1]


def isal(m: ScenarioModel) -> float:
    return asal(m, zero_info_policy(m))


def isel(m: ScenarioModel) -> float:
    return asel(m, zero_info_policy(m))


def acel(m: ScenarioModel, pi) -> float:
    return asel(m, pi) - isel(m)


class MetricReport(NamedTuple):
    asal: float
    isal: float
    asel: float
    isel: float
    acel: float

    def csv_row(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(self._fields)
        w.writerow([f"{v:.17g}" for v in self])
        return buf.getvalue()


def metric_report(m: ScenarioModel, pi) -> MetricReport:
    sat, sec = _levels(m, pi)
    sat0, sec0 = _levels(m, zero_info_policy(m))
    return MetricReport(sat, sat0, sec, sec0, sec - sec0)
