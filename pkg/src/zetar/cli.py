"""Command-line entry point: ``zetar validate|solve|learn|sweep|casestudy|rerun``.

Every command that writes files also writes ``manifest.json`` listing the
command line and the sha256 of each output, so a run can be repeated and
checked with ``zetar rerun``.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .casestudy import (SWEEP_COLUMNS, SWEEP_PARAMS, CaseStudyPoint, casestudy_bundle, evaluate_point, parse_grid,
                        policy_surface, write_rows)
from .errors import BudgetExceeded, NotConverged, ZetarError
from .geometry import write_polytope_json
from .insider import InsiderOracle
from .io import SchemaError, load_policy, load_scenario
from .learner import LearnerConfig, learn_ct_set, learned_optimum
from .optimizer import SolverConfig, solve_optimal_acel, solve_primal_eta
from .scenario import REFERENCE_PARAMS, CaseStudyParams, RiskPerception, validate_scenario

EXIT_OK, EXIT_DOMAIN, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
MANIFEST = "manifest.json"


class InputError(Exception):
    """Bad user input; maps to exit status 2."""


@dataclass
class RunManifest:
    command: str
    argv: list
    scenario: str | None
    overrides: dict
    out: str
    seed: int | None = None
    cwd: str = ""  # relative paths in argv resolve against this
    version: str = __version__
    checksums: dict = field(default_factory=dict)

    def record(self, out_dir, names) -> None:
        for name in names:
            with open(os.path.join(out_dir, name), "rb") as fh:
                self.checksums[name] = hashlib.sha256(fh.read()).hexdigest()

    def write(self, out_dir) -> None:
        with open(os.path.join(out_dir, MANIFEST), "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "RunManifest":
        with open(path) as fh:
            doc = json.load(fh)
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in doc.items() if k in known})


def _out_dir(args) -> str:
    out = os.environ.get("ZETAR_OUT") or args.out
    os.makedirs(out, exist_ok=True)
    return out


def _load(path):
    if not os.path.exists(path):
        raise InputError(f"{path}: no such file")
    return load_scenario(path)


def _write_text(out, name, text, written):
    with open(os.path.join(out, name), "w", newline="") as fh:
        fh.write(text)
    written.append(name)


def _finish(args, out, written, scenario=None, overrides=None, seed=None):
    man = RunManifest(args.command, list(args.argv), scenario, overrides or {}, out, seed, os.getcwd())
    man.record(out, written)
    man.write(out)
    return man


# --- commands -----------------------------------------------------------------------


def cmd_validate(args) -> int:
    m = _load(args.scenario)
    problems = validate_scenario(m)
    for p in problems:
        print(p)
    if not problems:
        print(f"ok: J={m.J} I={m.I} K={m.K}")
    return EXIT_DOMAIN if problems else EXIT_OK


def _parse_eta(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    try:
        eta = float(text)
    except ValueError as exc:
        raise InputError(f"--eta: not a number: {text!r}") from exc
    if not eta > 0:
        raise InputError("--eta must be positive")
    return eta


def _check_valid(m) -> int | None:
    problems = validate_scenario(m)
    for p in problems:
        print(p, file=sys.stderr)
    return EXIT_DOMAIN if problems else None


def cmd_solve(args) -> int:
    m = _load(args.scenario)
    if (code := _check_valid(m)) is not None:
        return code
    eta = _parse_eta(args.eta)
    default = None
    if args.default_policy and args.default_policy != "uniform":
        if not os.path.exists(args.default_policy):
            raise InputError(f"{args.default_policy}: no such file")
        default = load_policy(args.default_policy)
    try:
        cfg = SolverConfig(eta=eta, default_policy=default, tol=args.tol, max_iters=args.max_iters)
        cfg.prior_policy(m.K, m.I)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out = _out_dir(args)
    written = []
    code = EXIT_OK
    try:
        res = solve_primal_eta(m, cfg)
    except NotConverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        res, code = exc.result, EXIT_NUMERIC
    if res is not None:
        _write_text(out, "result.json", res.to_json() + "\n", written)
        _write_text(out, "metrics.csv", res.csv_row(header=True), written)
        print(f"r_eta={res.value:.10g} ACEL={res.metrics.acel:.10g} ISeL={res.metrics.isel:.10g} "
              f"ASaL={res.metrics.asal:.10g} policy={res.diagnostics.get('ct')}")
    _finish(args, out, written, args.scenario, {"eta": args.eta, "default_policy": args.default_policy})
    return code


def cmd_learn(args) -> int:
    m = _load(args.scenario)
    if (code := _check_valid(m)) is not None:
        return code
    try:
        cfg = LearnerConfig(epsilon=args.epsilon, emit=args.emit)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out = _out_dir(args)
    oracle = InsiderOracle(m, mode=args.mode, seed=args.seed)
    written = []
    overrides = {"epsilon": args.epsilon, "mode": args.mode, "emit": args.emit}
    try:
        rep = learn_ct_set(oracle, cfg)
    except BudgetExceeded as exc:
        partial = exc.partial
        if partial is not None:
            partial.write_transcript(os.path.join(out, "transcript.csv"))
            written.append("transcript.csv")
        print(f"error: {exc}", file=sys.stderr)
        _finish(args, out, written, args.scenario, overrides, args.seed)
        return EXIT_NUMERIC
    rep.write_transcript(os.path.join(out, "transcript.csv"))
    written.append("transcript.csv")
    oracle.write_transcript(os.path.join(out, "oracle.csv"))
    written.append("oracle.csv")
    _write_text(out, "learned.json", rep.to_json() + "\n", written)
    for k in range(m.K):
        name = f"polytope_{k}.json"
        write_polytope_json(os.path.join(out, name), rep.vreps[k], rep.hreps[k])
        written.append(name)
    learned = learned_optimum(m, rep)
    analytic = solve_optimal_acel(m).metrics.acel
    gap = abs(learned.planned_acel - analytic)
    summary = {
        "queries": rep.queries, "query_bound": rep.bound, "within_bound": rep.within_bound,
        "learned_acel": learned.planned_acel, "realized_acel": learned.realized_acel,
        "analytic_acel": analytic, "gap": gap,
        "learned_policy": learned.result.policy.tolist(), "learned_policy_class": learned.result.diagnostics["ct"],
    }
    _write_text(out, "learn_summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n", written)
    print(f"queries={sum(rep.queries.values())} bound/k={rep.bound} learned ACEL={learned.planned_acel:.10g} "
          f"realized={learned.realized_acel:.10g} analytic ACEL={analytic:.10g} gap={gap:.3g}")
    _finish(args, out, written, args.scenario, overrides, args.seed)
    return EXIT_OK


def cmd_sweep(args) -> int:
    m = _load(args.scenario)
    if (code := _check_valid(m)) is not None:
        return code
    out = _out_dir(args)
    written = []
    overrides = {"param": args.param, "grid": args.grid, "step": args.step}
    if args.param == "policy_square":
        if m.K != 2 or m.I != 2:
            raise InputError("policy_square sweep needs K = 2 actions and I = 2 audit schemes")
        write_rows(os.path.join(out, "sweep.csv"), policy_surface(m, args.step))
        written.append("sweep.csv")
    else:
        if args.param not in SWEEP_PARAMS:
            raise InputError(f"unknown parameter {args.param!r}; choose from policy_square, {', '.join(SWEEP_PARAMS)}")
        if m.case_study is None:
            raise InputError("parameter sweeps need a scenario with a case_study block")
        if args.grid is None:
            raise InputError("--grid is required")
        try:
            grid = parse_grid(args.grid)
        except ValueError as exc:
            raise InputError(f"--grid: {exc}") from exc
        base = CaseStudyPoint.from_scenario(m)

        def point(v):
            return {"param": args.param, "value": float(v),
                    **evaluate_point(base.with_param(args.param, float(v)).scenario())}

        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(point, grid))  # map keeps grid order
        write_rows(os.path.join(out, "sweep.csv"), rows, SWEEP_COLUMNS)
        written.append("sweep.csv")
    print(f"wrote {os.path.join(out, 'sweep.csv')}")
    _finish(args, out, written, args.scenario, overrides)
    return EXIT_OK


def _case_params(spec: str) -> CaseStudyParams:
    if spec == "reference":
        return REFERENCE_PARAMS
    if not os.path.exists(spec):
        raise InputError(f"{spec}: no such file")
    with open(spec) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{spec}: invalid JSON ({exc})") from exc
    doc = dict(doc.get("case_study", doc))
    try:
        risk = RiskPerception(**doc.pop("risk", {}))
        p = CaseStudyParams(**doc, risk=risk)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{spec}: {exc}") from exc
    if p.problems():
        raise InputError("; ".join(p.problems()))
    return p


def cmd_casestudy(args) -> int:
    params = _case_params(args.params)
    out = _out_dir(args)
    written = casestudy_bundle(out, params, args.epsilon)
    print(f"wrote {len(written)} files to {out}")
    _finish(args, out, written, None, {"params": args.params, "epsilon": args.epsilon})
    return EXIT_OK


def cmd_rerun(args) -> int:
    """Repeat a recorded run in a scratch directory and compare checksums."""
    if not os.path.exists(args.manifest):
        raise InputError(f"{args.manifest}: no such file")
    man = RunManifest.load(args.manifest)
    with tempfile.TemporaryDirectory() as tmp:
        argv = _replace_out(man.argv, tmp)
        env_out = os.environ.pop("ZETAR_OUT", None)
        here = os.getcwd()
        try:
            if man.cwd:
                os.chdir(man.cwd)
            code = main(argv)
        finally:
            os.chdir(here)
            if env_out is not None:
                os.environ["ZETAR_OUT"] = env_out
        fresh = RunManifest.load(os.path.join(tmp, MANIFEST))
    diff = sorted(n for n in set(man.checksums) | set(fresh.checksums)
                  if man.checksums.get(n) != fresh.checksums.get(n))
    for n in diff:
        print(f"mismatch: {n}")
    if not diff:
        print(f"reproduced {len(man.checksums)} files")
    return EXIT_DOMAIN if diff or code != EXIT_OK else EXIT_OK


def _replace_out(argv, out):
    argv = list(argv)
    for i, a in enumerate(argv):
        if a == "--out" and i + 1 < len(argv):
            argv[i + 1] = out
            return argv
        if a.startswith("--out="):
            argv[i] = f"--out={out}"
            return argv
    return argv + ["--out", out]


# --- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zetar", description="Trustworthy recommendation policies for insider compliance.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a scenario file")
    s.add_argument("scenario")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("solve", help="optimal trustworthy policy")
    s.add_argument("scenario")
    s.add_argument("--eta", default="inf", help="customization level, a positive number or 'inf'")
    s.add_argument("--default-policy", default="uniform", help="policy JSON file or 'uniform'")
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--max-iters", type=int, default=500)
    s.add_argument("--out", default="zetar_out")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("learn", help="learn the trusted set from insider responses")
    s.add_argument("scenario")
    s.add_argument("--epsilon", type=float, default=1e-3)
    s.add_argument("--mode", choices=["direct", "episodic"], default="direct")
    s.add_argument("--emit", choices=["midpoint", "trusted_end"], default="midpoint",
                   help="point reported per searched edge")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="zetar_out")
    s.set_defaults(func=cmd_learn)

    s = sub.add_parser("sweep", help="one-parameter sweep of a case-study scenario")
    s.add_argument("scenario")
    s.add_argument("--param", required=True, help=f"policy_square or one of: {', '.join(SWEEP_PARAMS)}")
    s.add_argument("--grid", help="start:stop:step or a comma-separated list")
    s.add_argument("--step", type=float, default=0.02, help="grid step for policy_square")
    s.add_argument("--jobs", type=int, default=4)
    s.add_argument("--out", default="zetar_out")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("casestudy", help="write the full case-study bundle")
    s.add_argument("--params", default="reference", help="parameter JSON file or 'reference'")
    s.add_argument("--epsilon", type=float, default=1e-3)
    s.add_argument("--out", default="zetar_out")
    s.set_defaults(func=cmd_casestudy)

    s = sub.add_parser("rerun", help="repeat a recorded run and compare checksums")
    s.add_argument("manifest")
    s.set_defaults(func=cmd_rerun)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    args.argv = argv
    try:
        return args.func(args)
    except (InputError, SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ZetarError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC if isinstance(exc, RuntimeError) else EXIT_DOMAIN
    except np.linalg.LinAlgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
