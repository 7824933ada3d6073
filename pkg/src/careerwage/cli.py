"""Batch command-line front end.

Every run writes its artifacts into ``--out`` (atomically) and prints a
short report with 9 significant digits. The exit status is 1 when an audit
or verification fails, 2 on bad input.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import comparative, generators, informed, oracle, uninformed
from .environment import (SchemaError, career_value, complementarity_check, effective_cost,
                          linear_criterion, load_environment)
from .wage_policy import WagePolicy

COMMANDS = ("analyze", "solve", "solve-informed", "enumerate", "verify", "sweep")
MIN_GRID = 100
AUDIT_TOL = 1e-7
RANDOM_FAMILIES = {
    "random:linear": generators.random_linear_environment,
    "random:zigzag": generators.zigzag_environment,
    "random:informed": generators.random_informed_binary,
}

SCHEMA = {
    "cdf.csv": {"w": "wage", "cdf": "F(w)", "tail": "R(w) = 1 - F(w-)"},
    "d_samples.csv": {"q": "total working probability", "D": "career value D(q)"},
    "records.csv": {
        "mode": "uninformed | informed", "classification": "FullWork | FullShirk | Mixed",
        "thresholds": "JSON list of threshold wages per type",
        "q": "JSON list of working probabilities",
        "q_range_lo": "scan-coordinate range start (q or pivot threshold)",
        "q_range_hi": "scan-coordinate range end", "mixing": "JSON list of atom mixing weights",
        "residual": "|w + D - lambda| at the pivot", "continuum": "record covers a continuum",
    },
    "sweep.csv": {c: c for c in comparative.CSV_COLUMNS},
}


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.9g}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(fmt(v) for v in x) + "]"
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    return x


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(out: Path, name: str, doc: dict):
    write_atomic(out / name, json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def _write_csv(out: Path, name: str, text: str, seed):
    write_atomic(out / name, f"# seed={seed}\n" + text)
    _write_json(out, "schema.json", {"seed": seed, "files": SCHEMA})


def _load_env(spec: str, seed):
    if spec in RANDOM_FAMILIES:
        return RANDOM_FAMILIES[spec](seed)
    return load_environment(spec)


def _parse_target(text, env):
    if text is None:
        return None
    vals = [float(v) for v in str(text).split(",")]
    if not env.informed:
        if len(vals) != 1:
            raise UsageError("uninformed targets are a single working probability")
        return vals[0]
    if len(vals) != env.K:
        raise UsageError(f"informed targets need {env.K} comma-separated values")
    return vals


def build_parser():
    ap = argparse.ArgumentParser(prog="careerwage", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="JSON run config; flags override its fields")
    ap.add_argument("--command", choices=COMMANDS)
    ap.add_argument("--env", help="environment JSON path, or random:linear|zigzag|informed")
    ap.add_argument("--target-q", dest="target_q", help="q, or comma-separated profile (low type first)")
    ap.add_argument("--grid", type=int, help=f"grid size (>= {MIN_GRID})")
    ap.add_argument("--tol", type=float, help="oracle tolerance (> 0)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--policy", help="policy JSON for enumerate/verify")
    ap.add_argument("--eps", type=float, help="shift for verify (default 1e-3)")
    ap.add_argument("--axis", choices=comparative.AXES)
    ap.add_argument("--points", help="comma-separated axis values")
    ap.add_argument("--skip-assumptions", action="store_true", default=None,
                    help="run the multi-type construction even if assumption checks fail")
    return ap


DEFAULTS = {"grid": 4096, "tol": oracle.DEFAULT_TOL, "out": "out", "seed": 0, "eps": 1e-3,
            "skip_assumptions": False}


def resolve_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
        unknown = set(doc) - set(vars(args)) - {"target_q"}
        if unknown:
            raise UsageError(f"unknown config fields: {sorted(unknown)}")
        cfg.update(doc)
    for k, v in vars(args).items():
        if k != "config" and v is not None:
            cfg[k] = v
    if not cfg.get("command"):
        raise UsageError("--command is required")
    if not cfg.get("env"):
        raise UsageError("--env is required")
    if int(cfg["grid"]) < MIN_GRID:
        raise UsageError(f"--grid must be at least {MIN_GRID}")
    if not float(cfg["tol"]) > 0:
        raise UsageError("--tol must be positive")
    if not float(cfg["eps"]) > 0:
        raise UsageError("--eps must be positive")
    return cfg


# ---------------------------------------------------------------------------
# commands

def cmd_analyze(env, cfg, out: Path):
    seed = cfg["seed"]
    lam, flag = effective_cost(env, with_flag=True)
    rep = {"seed": seed, "info_mode": env.info_mode, "lambda": lam, "lambda_exceeds_max_D": flag}
    if env.informed:
        lo, hi = informed.critical_wages_informed(env)
        rep.update(w_low=lo, w_high=hi, dispersion=hi > lo)
        if env.K == 2:
            rep["dispersion_criterion"] = informed.dispersion_criterion(env)
        rep["assumptions"] = informed.assumptions_check(env, seed=seed).to_dict()
    else:
        lo, hi = uninformed.critical_wages(env, cfg["grid"])
        rep.update(w_low=lo, w_high=hi,
                   strategic_uncertainty=uninformed.strategic_uncertainty(env, cfg["grid"]))
        try:
            rep["complementarity"] = complementarity_check(env).verdict
        except ValueError as exc:
            rep["complementarity"] = f"n/a ({exc})"
        if env.is_linear:
            cov, pos = linear_criterion(env)
            rep.update(covariance=cov, covariance_positive=pos)
        q = np.linspace(0.0, 1.0, 257)
        d = career_value(env, q)
        _write_csv(out, "d_samples.csv", "q,D\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(q, d)),
                   seed)
    _write_json(out, "analyze.json", rep)
    for k in ("lambda", "w_low", "w_high", "strategic_uncertainty", "dispersion",
              "covariance", "complementarity"):
        if k in rep:
            print(f"{k}={fmt(rep[k])}")
    return 0


def _emit_policy(out: Path, pol: WagePolicy, seed):
    doc = pol.to_dict()
    doc["seed"] = seed
    _write_json(out, "policy.json", doc)
    WagePolicy.from_dict(json.loads((out / "policy.json").read_text()))  # round trip
    _write_csv(out, "cdf.csv", pol.cdf_csv(), seed)


def cmd_solve(env, cfg, out: Path):
    if env.informed:
        raise UsageError("use solve-informed for informed environments")
    target = _parse_target(cfg.get("target_q"), env)
    if target is None or target == 1.0:
        sol = uninformed.robust_policy(env, cfg["grid"])
    else:
        sol = uninformed.robust_policy_partial(env, target, cfg["grid"])
    _emit_policy(out, sol.policy, cfg["seed"])
    rep = sol.report()
    rep["seed"] = cfg["seed"]
    ok = sol.binding_residual_max <= AUDIT_TOL and sol.minorant_violation <= 10 * AUDIT_TOL
    rep["audit_passed"] = ok
    _write_json(out, "audit.json", rep)
    for k in ("lambda", "w_low", "w_high", "strategic_uncertainty", "mean", "variance",
              "binding_residual_max", "audit_passed"):
        print(f"{k}={fmt(rep[k])}")
    print(f"mass_points={fmt([list(a) for a in sol.mass_points])}")
    return 0 if ok else 1


def cmd_solve_informed(env, cfg, out: Path):
    if not env.informed:
        raise UsageError("solve-informed needs an informed environment")
    target = _parse_target(cfg.get("target_q"), env)
    seed = cfg["seed"]
    if env.K == 2:
        if target is None or all(t == 1.0 for t in target):
            sol = informed.robust_policy_informed(env)
        else:
            try:
                sol = informed.robust_policy_informed_Q(env, target)
            except informed.NotImplementableError as exc:
                print(f"not implementable: {json.dumps(_jsonable(exc.witness))}")
                _write_json(out, "audit.json", {"seed": seed, "implementable": False,
                                                "witness": exc.witness})
                return 1
    else:
        if target is not None and not all(t == 1.0 for t in target):
            raise UsageError("multi-type targets other than full work are not supported")
        report = informed.assumptions_check(env, seed=seed)
        if not report.ok and not cfg["skip_assumptions"]:
            _write_json(out, "assumptions.json", {"seed": seed, **report.to_dict()})
            print(f"assumptions failed: {', '.join(report.failed())}")
            return 1
        sol = informed.greedy_policy_multi(env, require_assumptions=False)
    _emit_policy(out, sol.policy, seed)
    rep = sol.report()
    ok = sol.binding_residual_max <= AUDIT_TOL and sol.audit.get("slack_below_pivot_threshold", -1) < 0
    rep.update(seed=seed, audit_passed=ok)
    _write_json(out, "audit.json", rep)
    for k in ("w_low_tilde", "w_high_tilde", "dispersion", "mean", "binding_residual_max",
              "audit_passed"):
        print(f"{k}={fmt(rep[k])}")
    print(f"atoms={fmt([list(a) for a in sol.atom_list])}")
    return 0 if ok else 1


def _load_policy(cfg):
    if not cfg.get("policy"):
        raise UsageError("--policy is required")
    return WagePolicy.from_json(Path(cfg["policy"]).read_text())


def _default_target(env):
    return [1.0] * env.K if env.informed else 1.0


def cmd_enumerate(env, cfg, out: Path):
    pol = _load_policy(cfg)
    grid, tol = max(cfg["grid"], MIN_GRID), cfg["tol"]
    if env.informed:
        recs = oracle.enumerate_informed(env, pol, grid, tol)
    else:
        recs = oracle.enumerate_uninformed(env, pol, grid, tol)
    _write_csv(out, "records.csv", oracle.records_csv(recs), cfg["seed"])
    _write_json(out, "records.json", {"seed": cfg["seed"], "records": [r.to_dict() for r in recs]})
    for r in recs:
        print(f"{r.classification} thresholds={fmt(r.thresholds)} q={fmt(r.q)} "
              f"residual={fmt(r.residual)}")
    return 0


def cmd_verify(env, cfg, out: Path):
    pol = _load_policy(cfg)
    target = _parse_target(cfg.get("target_q"), env) or _default_target(env)
    eps = cfg["eps"]
    if env.informed:
        split = None
        if env.K == 2 and target[1] > target[0] > 0:
            split = float(informed.target_thresholds(env, target)[0])
        approx = oracle.approximating_policy(pol, eps, "informed", split_at=split)
    else:
        approx = oracle.approximating_policy(pol, eps, "uninformed")
    v = oracle.fully_implements(env, approx, target, grid_n=max(cfg["grid"], MIN_GRID),
                                tol=cfg["tol"])
    doc = v.to_dict()
    doc.update(seed=cfg["seed"], eps=eps)
    _write_json(out, "verdict.json", doc)
    print(f"fully_implements={fmt(v.fully_implements)} target_present={fmt(v.target_present)} "
          f"witnesses={len(v.witnesses)}")
    for r in v.witnesses:
        print(f"witness {r.classification} thresholds={fmt(r.thresholds)} q={fmt(r.q)}")
    return 0 if v.fully_implements else 1


def cmd_sweep(env, cfg, out: Path):
    if not cfg.get("axis") or not cfg.get("points"):
        raise UsageError("sweep needs --axis and --points")
    pts = [float(v) for v in str(cfg["points"]).split(",")]
    res = comparative.sweep(env, cfg["axis"], pts)
    _write_csv(out, "sweep.csv", res.to_csv(), cfg["seed"])
    for p in res.points:
        print(f"{cfg['axis']}={fmt(p.value)} range={fmt(p.range)} variance={fmt(p.variance)} "
              f"mean={fmt(p.mean)}" + (f" error={p.error}" if p.error else ""))
    bad = [p for p in res.points if p.policy is not None and p.binding_residual_max > AUDIT_TOL]
    return 1 if bad else 0


HANDLERS = {"analyze": cmd_analyze, "solve": cmd_solve, "solve-informed": cmd_solve_informed,
            "enumerate": cmd_enumerate, "verify": cmd_verify, "sweep": cmd_sweep}


def run(cfg: dict) -> int:
    env = _load_env(cfg["env"], cfg["seed"])
    out = Path(cfg["out"])
    return HANDLERS[cfg["command"]](env, cfg, out)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return run(cfg)
    except SchemaError as exc:
        print(f"schema error in field '{exc.field}': {exc}", file=sys.stderr)
        return 2
    except (UsageError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
