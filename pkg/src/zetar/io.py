"""Scenario files: strict JSON documents mirroring :class:`ScenarioModel`."""
from __future__ import annotations

import json
from dataclasses import asdict, fields

import jsonschema
import numpy as np

from .errors import ZetarError
from .scenario import CaseStudyParams, RiskPerception, ScenarioModel


class SchemaError(ZetarError, ValueError):
    """A scenario document is malformed (as opposed to numerically invalid)."""


_NUMBER_TREE = {"type": "array"}
_CASE_FIELDS = [f.name for f in fields(CaseStudyParams) if f.name != "risk"]

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["prior_y", "audit_policy", "v_U", "v_D"],
    "properties": {
        "sp_labels": {"type": "array", "items": {"type": "string"}},
        "as_labels": {"type": "array", "items": {"type": "string"}},
        "action_labels": {"type": "array", "items": {"type": "string"}},
        "prior_y": {"type": "array", "items": {"type": "number"}},
        "audit_policy": _NUMBER_TREE,
        "v_U": _NUMBER_TREE,
        "v_D": _NUMBER_TREE,
        "case_study": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                **{name: {"type": "number"} for name in _CASE_FIELDS},
                "risk": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"gamma_d": {"type": "number"}, "gamma_s": {"type": "number"}},
                },
            },
        },
    },
}


def _tensor(doc, key, ndim):
    try:
        arr = np.array(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{key}: not a rectangular numeric array ({exc})") from exc
    if arr.ndim != ndim:
        raise SchemaError(f"{key}: expected {ndim} nesting levels, got {arr.ndim}")
    return arr


def scenario_from_dict(doc: dict) -> ScenarioModel:
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{where}: {exc.message}") from exc
    prior = _tensor(doc, "prior_y", 1)
    psi = _tensor(doc, "audit_policy", 2)
    v_U = _tensor(doc, "v_U", 3)
    v_D = _tensor(doc, "v_D", 3)
    J, I, K = v_U.shape
    labels = {
        "sp_labels": doc.get("sp_labels", [f"y{j + 1}" for j in range(len(prior))]),
        "as_labels": doc.get("as_labels", [f"x{i + 1}" for i in range(psi.shape[1])]),
        "action_labels": doc.get("action_labels", [f"a{k + 1}" for k in range(K)]),
    }
    case = None
    if "case_study" in doc:
        block = dict(doc["case_study"])
        risk = RiskPerception(**block.pop("risk", {}))
        case = CaseStudyParams(**block, risk=risk)
    return ScenarioModel(prior_y=prior, audit_policy=psi, v_U=v_U, v_D=v_D, case_study=case, **labels)


def scenario_to_dict(m: ScenarioModel) -> dict:
    doc = {
        "sp_labels": list(m.sp_labels),
        "as_labels": list(m.as_labels),
        "action_labels": list(m.action_labels),
        "prior_y": m.prior_y.tolist(),
        "audit_policy": m.audit_policy.tolist(),
        "v_U": m.v_U.tolist(),
        "v_D": m.v_D.tolist(),
    }
    if m.case_study is not None:
        doc["case_study"] = asdict(m.case_study)
    return doc


def load_scenario(path) -> ScenarioModel:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    return scenario_from_dict(doc)


def save_scenario(m: ScenarioModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(m), fh, indent=2)
        fh.write("\n")


def load_policy(path) -> np.ndarray:
    """A policy file holds a K x I nested list, optionally under the key ``policy``."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    if isinstance(doc, dict):
        doc = doc.get("policy")
    try:
        pi = np.array(doc, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: policy is not a numeric matrix") from exc
    if pi.ndim != 2:
        raise SchemaError(f"{path}: policy must be a K x I matrix")
    return pi
