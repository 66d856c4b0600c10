"""Batch front end: config parsing, verification pipelines, JSON reports.

Exit status: 0 all asserted tolerances pass, 1 a tolerance fails, 2 bad config.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, asdict

import numpy as np

from . import closed_form as cf
from .bethe_solver import solve, SolverConfig, expected_count
from .funeq import functional_terms
from .hierarchy import (extract_hierarchy, leading_closed_form, align, kernel, overlap,
                        OperatorMatrix, commutator_with_residual, perturb_aggregate)
from .lattice_oracle import ModelParams, TWISTED, OPEN, eigencheck, oracle_polynomial

TASKS = ("solve-bethe", "verify-annihilation", "extract-hierarchy", "kernel", "constraints", "full-report")
ORACLE_MAX_L = 6


class ConfigError(ValueError):
    pass


@dataclass
class JobConfig:
    boundary: str = TWISTED
    L: int = 2
    n: int = 1
    task: str = "solve-bethe"
    params: object = "random-generic"   # or dict with gamma, mu, phi1, phi2, h, hbar
    seed: int = 0
    tol: float = 1e-8
    out: str | None = None
    samples: int = 20

    def validate(self):
        if self.boundary not in (TWISTED, OPEN):
            raise ConfigError(f"boundary must be {TWISTED!r} or {OPEN!r}")
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if not (isinstance(self.L, int) and self.L >= 1):
            raise ConfigError("L must be a positive integer")
        if not (isinstance(self.n, int) and 0 <= self.n <= self.L):
            raise ConfigError("need 0 <= n <= L")
        if self.L > ORACLE_MAX_L:
            raise ConfigError(f"L <= {ORACLE_MAX_L} required for oracle-backed tasks")
        if self.task == "constraints" and (self.n != 2 or self.L < 2):
            raise ConfigError("constraints need n = 2")
        if self.params != "random-generic" and not isinstance(self.params, dict):
            raise ConfigError("params must be 'random-generic' or a mapping")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")


def _c(z):
    return [float(np.real(z)), float(np.imag(z))]


def random_generic(boundary, L, seed):
    """Draw generic parameters: |q| in [0.5, 0.9], y_j near the unit circle."""
    rng = np.random.default_rng(seed)
    q = rng.uniform(0.5, 0.9) * np.exp(1j * rng.uniform(0.2, 1.2))
    y = (1 + 0.15 * rng.normal(size=L)) * np.exp(2j * np.pi * (np.arange(L) + 0.3 * rng.uniform(size=L)) / L)
    phi2 = rng.uniform(0.5, 1.5) * np.exp(1j * rng.uniform(0.3, 2.5))
    t = np.exp(0.3 * rng.normal() + 0.5j * rng.normal())
    tb = np.exp(0.3 * rng.normal() + 0.5j * rng.normal())
    return ModelParams.from_polynomial(boundary, q, y, phi1=1.0, phi2=phi2 if boundary == TWISTED else 1.0,
                                       t=t if boundary == OPEN else 1.0, tbar=tb if boundary == OPEN else 1.0)


def build_params(cfg):
    if cfg.params == "random-generic":
        return random_generic(cfg.boundary, cfg.L, cfg.seed)
    d = dict(cfg.params)
    d.setdefault("boundary", cfg.boundary)
    try:
        p = ModelParams.from_json(d)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad parameters: {e}") from e
    if p.L != cfg.L:
        raise ConfigError("parameter count does not match L")
    return p


def load_config(path):
    """JSON, or key=value lines (values parsed as JSON when possible)."""
    text = open(path).read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError:
        d = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"cannot parse config line {line!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            try:
                d[k] = json.loads(v)
            except json.JSONDecodeError:
                d[k] = v
    unknown = set(d) - set(JobConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    return d


# ------------------------------------------------------------ task bodies

def _branches(p, n, cfg):
    return solve(p, n, SolverConfig(seed=cfg.seed))


def task_solve(p, cfg, rep):
    br = _branches(p, cfg.n, cfg)
    rows = []
    for r in br:
        rows.append({"roots": [_c(z) for z in r.roots], "residual": r.residual,
                     "aggregate": _c(r.aggregate), "eigencheck": eigencheck(p, r)})
    rep["bethe"] = {"branches": rows, "count": len(br), "expected": expected_count(p.L, cfg.n)}
    ok = all(row["eigencheck"] < cfg.tol for row in rows)
    return ok, br


def task_annihilation(p, cfg, rep, br):
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for r in br:
        S = oracle_polynomial(p, r)
        worst = 0.0
        for _ in range(cfg.samples):
            X = np.exp(0.5 * rng.normal(size=cfg.n) + 2j * np.pi * rng.uniform(size=cfg.n))
            x0 = np.exp(0.5 * rng.normal() + 2j * np.pi * rng.uniform())
            tm = functional_terms(p, r, S, x0, X)
            worst = max(worst, abs(tm.sum()) / np.abs(tm).max())
        H = extract_hierarchy(p, r, seed=cfg.seed)
        rows.append({"functional_residual": worst,
                     "operator_residuals": [o.residual(S) for o in H.ops]})
    rep["annihilation"] = rows
    mx = max([0.0] + [max([row["functional_residual"]] + row["operator_residuals"]) for row in rows])
    rep["annihilation_max"] = mx
    return mx < cfg.tol


def task_hierarchy(p, cfg, rep, br):
    rows, ok, bundles = [], True, []
    for r in br:
        H = extract_hierarchy(p, r, seed=cfg.seed)
        S = oracle_polynomial(p, r)
        lc = leading_closed_form(p, r, H.samples)
        _, al = align(H.ops[-1].matrix, lc.matrix)
        comm, cres = commutator_with_residual(H.ops[0], H.ops[-1]) if len(H.ops) > 1 else (0.0, 0.0)
        rows.append({"count": len(H.ops), "saturation": H.saturation, "leading_alignment": al,
                     "annihilation": [o.residual(S) for o in H.ops], "commutator_first_last": comm,
                     "commutator_projection_residual": cres})
        ok &= H.saturation < 1e-9 and al < 1e-10 and max(rows[-1]["annihilation"]) < cfg.tol
        bundles.append(H.ops)
    rep["hierarchy"] = rows
    return ok, bundles


def task_kernel(p, cfg, rep, br):
    rows, ok = [], True
    for r in br:
        H = extract_hierarchy(p, r, seed=cfg.seed)
        K = kernel(H.ops)
        S = oracle_polynomial(p, r)
        Kp = kernel(extract_hierarchy(p, perturb_aggregate(p, r, 1e-2), n=cfg.n, seed=cfg.seed).ops)
        lead = kernel([H.ops[-1]])
        ov = overlap(K.basis[0], S) if len(K.basis) == 1 else None
        rows.append({"dim": len(K.basis), "spectrum": K.spectrum.tolist(), "oracle_overlap": ov,
                     "perturbed_dim": len(Kp.basis), "perturbed_ratio": float(Kp.spectrum[-1]),
                     "leading_alone_dim": len(lead.basis)})
        ok &= len(K.basis) == 1 and ov is not None and ov > 1 - 1e-7
        ok &= len(Kp.basis) == 0 and Kp.spectrum[-1] > 1e-4
    rep["kernel"] = rows
    return ok


def task_constraints(p, cfg, rep, br):
    cr = cf.s2_constraint(p, seed=cfg.seed) if p.boundary == TWISTED else cf.t2_constraint(p, seed=cfg.seed)
    aggs = [r.aggregate for r in br]
    table = []
    for s in cr.solutions:
        d = min((abs(s.aggregate - a) for a in aggs), default=np.inf)
        table.append({"root": _c(s.aggregate), "nearest_branch_distance": float(d)})
    rep["constraints"] = {"coeffs": [_c(z) for z in cr.coeffs], "trivial": [_c(z) for z in cr.trivial],
                          "matching": table, "nontrivial_count": len(cr.solutions), "branch_count": len(br)}
    return len(cr.solutions) == len(br) and all(row["nearest_branch_distance"] < cfg.tol for row in table)


# ------------------------------------------------------------ orchestration

def run(cfg):
    cfg.validate()
    p = build_params(cfg)
    rep = {"config": {k: v for k, v in asdict(cfg).items() if k != "out"},
           "parameters": p.to_json(),
           "random_generic_scheme": "|q| in [0.5,0.9], arg q in [0.2,1.2]; y_j=(1+0.15N)exp(2πi(j+0.3U)/L)",
           "timings": {}, "status": {}}
    t0 = time.perf_counter()
    ok, br = task_solve(p, cfg, rep)
    rep["timings"]["solve"] = time.perf_counter() - t0
    rep["status"]["solve-bethe"] = ok
    steps = {"verify-annihilation": lambda: task_annihilation(p, cfg, rep, br),
             "extract-hierarchy": lambda: task_hierarchy(p, cfg, rep, br)[0],
             "kernel": lambda: task_kernel(p, cfg, rep, br),
             "constraints": lambda: task_constraints(p, cfg, rep, br)}
    todo = list(steps) if cfg.task == "full-report" else ([cfg.task] if cfg.task in steps else [])
    if cfg.task == "full-report" and cfg.n != 2:
        todo.remove("constraints")
    if cfg.n == 0:
        todo = [t for t in todo if t != "kernel"]
    for name in todo:
        t0 = time.perf_counter()
        try:
            rep["status"][name] = bool(steps[name]())
        except Exception as e:  # report, do not crash the batch job
            rep["status"][name] = False
            rep.setdefault("errors", {})[name] = f"{type(e).__name__}: {e}"
        rep["timings"][name] = time.perf_counter() - t0
    rep["pass"] = all(rep["status"].values())
    return rep


def report_digest(rep):
    """sha256 of the report with timing fields removed."""
    r = {k: v for k, v in rep.items() if k != "timings"}
    return hashlib.sha256(json.dumps(r, sort_keys=True).encode()).hexdigest()


def export_bundle(cfg, path=None):
    cfg.validate()
    p = build_params(cfg)
    br = _branches(p, cfg.n, cfg)
    recs = []
    for b, r in enumerate(br):
        H = extract_hierarchy(p, r, seed=cfg.seed)
        recs.append({"branch": b, "roots": [_c(z) for z in r.roots], "operators": [o.to_json() for o in H.ops]})
    bundle = {"parameters": p.to_json(), "n": cfg.n, "seed": cfg.seed, "branches": recs}
    text = json.dumps(bundle, sort_keys=True)
    bundle_hash = hashlib.sha256(text.encode()).hexdigest()
    if path:
        with open(path, "w") as f:
            f.write(text)
    return bundle, bundle_hash


def load_bundle(path_or_dict):
    d = path_or_dict if isinstance(path_or_dict, dict) else json.load(open(path_or_dict))
    return [[OperatorMatrix.from_json(o) for o in b["operators"]] for b in d["branches"]]


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, complex):
        return _c(o)
    raise TypeError(type(o))


def main(argv=None):
    ap = argparse.ArgumentParser(prog="sixvertex-pde", description=__doc__.splitlines()[0])
    ap.add_argument("task", choices=TASKS)
    ap.add_argument("--config")
    ap.add_argument("--boundary", choices=(TWISTED, OPEN))
    ap.add_argument("--L", type=int)
    ap.add_argument("--n", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--out")
    ap.add_argument("--bundle", help="also export the operator bundle (extract-hierarchy)")
    a = ap.parse_args(argv)
    try:
        d = load_config(a.config) if a.config else {}
        for k in ("boundary", "L", "n", "seed", "tol", "out"):
            if getattr(a, k) is not None:
                d[k] = getattr(a, k)
        d["task"] = a.task
        cfg = JobConfig(**d)
        cfg.validate()
        build_params(cfg)
    except (ConfigError, ValueError, TypeError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    rep = run(cfg)
    rep["digest"] = report_digest(rep)
    if a.bundle and a.task == "extract-hierarchy":
        _, h = export_bundle(cfg, a.bundle)
        rep["bundle_sha256"] = h
    text = json.dumps(rep, indent=1, sort_keys=True, default=_json_default)
    if cfg.out:
        with open(cfg.out, "w") as f:
            f.write(text)
    else:
        print(text)
    return 0 if rep["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
