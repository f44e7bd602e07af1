"""Batch command line: ``driftfem solve|rho|verify|study <name>``.

Exit codes: 0 all checks passed, 2 a check failed, 3 input error,
4 numerical failure (positivity or solver).
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import verify
from .errors import InputError, NonFiniteFieldError, NumericalError
from .fields import (
    Bump,
    Checkerboard,
    Constant,
    ConstantMatrix,
    ConstantVector,
    CounterexampleW,
    IdentityMatrix,
    ManufacturedLoad,
    PerimeterWave,
    ProductSine,
    ScaledVector,
    ZeroVector,
    preset_counterexample,
    preset_gradient_bump,
    preset_skew_example,
)
from .linsolve import SolveOptions
from .mesh import DomainSpec
from .pipeline import OUTSIDE_REGIME, ProblemSpec, construct_rho, solve_problem

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3, 4
OUTPUT_DIR_ENV = "DRIFTFEM_OUTPUT_DIR"
STUDIES = ("blowup", "annulus", "convergence", "mollifier", "weak_max_principle",
           "subsolution", "contraction")
CHECKS = ("divfree", "contraction", "energy", "weak_max_principle", "coercivity",
          "form_bound", "equivalence")

_num = {"type": "number"}
_vec = {"type": "array", "items": _num, "minItems": 2, "maxItems": 3}
_mat = {"type": "array", "items": _vec, "minItems": 2, "maxItems": 3}
_real = {"anyOf": [_num, {"enum": ["inf"]}]}

# params accepted by each preset; the schema lists their union
SCALAR_PRESETS = {
    "constant": {"value"},
    "bump": {"center", "radius", "amplitude"},
    "product_sine": {"amplitude"},
    "perimeter_wave": {"frequency"},
    "counterexample_w": set(),
    "manufactured_product_sine": {"amplitude"},
}
VECTOR_PRESETS = {
    "zero": {"scale"},
    "constant": {"vector", "scale"},
    "gradient_bump": {"center", "radius", "amplitude", "scale"},
    "counterexample": {"scale"},
    "skew": {"center", "scale"},
}
MATRIX_PRESETS = {
    "identity": set(),
    "constant": {"matrix"},
    "checkerboard": {"M1", "M2", "cell"},
}


def _preset_schema(names, params):
    return {"type": "object", "required": ["preset"], "additionalProperties": False,
            "properties": {"preset": {"enum": sorted(names)}, **params}}


SCALAR_SCHEMA = _preset_schema(SCALAR_PRESETS, {
    "value": _num, "center": _vec, "radius": _num, "amplitude": _num, "frequency": _num})
VECTOR_SCHEMA = _preset_schema(VECTOR_PRESETS, {
    "vector": _vec, "center": _vec, "radius": _num, "amplitude": _num, "scale": _num})
MATRIX_SCHEMA = _preset_schema(MATRIX_PRESETS, {
    "matrix": _mat, "M1": _mat, "M2": _mat, "cell": _num})

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "required": ["domain"],
            "properties": {
                "domain": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["dim"],
                    "properties": {
                        "dim": {"enum": [2, 3]},
                        "inner_box": {"type": "array", "items": {
                            "type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
                        "hole": {"anyOf": [{"type": "null"}, {"type": "array", "items": {
                            "type": "array", "items": _num, "minItems": 2, "maxItems": 2}}]},
                        "container_padding": _num,
                    },
                },
                "A": MATRIX_SCHEMA,
                "H1": VECTOR_SCHEMA,
                "H2": VECTOR_SCHEMA,
                "div_H2": SCALAR_SCHEMA,
                "f": SCALAR_SCHEMA,
                "c": SCALAR_SCHEMA,
                "c_class": {"enum": ["L1", "L2d/(d+2)"]},
                "alpha": _num,
                "q": _real,
                "x1": _vec,
                "mesh_n": {"type": "integer", "minimum": 1},
                "hole_values": SCALAR_SCHEMA,
                "thetas": {"type": "array", "items": _real, "minItems": 1},
                "positivity_floor": _num,
                "solver": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "method": {"enum": ["auto", "direct", "krylov"]},
                        "rel_tol": _num,
                        "max_iter": {"type": "integer"},
                        "precondition": {"enum": ["none", "diagonal", "shifted"]},
                        "gamma": _num,
                    },
                },
            },
        },
        "checks": {"type": "array", "items": {"enum": list(CHECKS)}},
        "study": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dim": {"enum": [2, 3]},
                "variant": {"enum": ["unpunctured", "punctured", "skew"]},
                "levels": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "epsilons": {"type": "array", "items": _num},
                "thetas": {"type": "array", "items": _real},
                "drift": _vec,
                "frequency": _num,
            },
        },
        "seed": {"type": "integer"},
    },
}


# --------------------------------------------------------------------------
# config loading
# --------------------------------------------------------------------------

def _path_of(err):
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def validate_config(cfg):
    """Raise :class:`InputError` naming the first offending key."""
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise InputError(f"config error at {_path_of(err)}: {err.message}")
    problem = cfg.get("problem", {})
    for key, table in (("A", MATRIX_PRESETS), ("H1", VECTOR_PRESETS), ("H2", VECTOR_PRESETS),
                       ("div_H2", SCALAR_PRESETS), ("f", SCALAR_PRESETS),
                       ("c", SCALAR_PRESETS), ("hole_values", SCALAR_PRESETS)):
        spec = problem.get(key)
        if spec is None:
            continue
        extra = sorted(set(spec) - {"preset"} - table[spec["preset"]])
        if extra:
            raise InputError(f"config error at problem.{key}: key {extra[0]!r} is not a "
                             f"parameter of preset {spec['preset']!r}")


def load_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path} is not valid JSON: {exc}") from exc
    validate_config(cfg)
    return cfg


def _real_value(v):
    return math.inf if v == "inf" else float(v)


def _build_domain(spec):
    d = spec["dim"]
    box = spec.get("inner_box", [[0.0, 1.0]] * d)
    if len(box) != d:
        raise InputError(f"problem.domain.inner_box has {len(box)} axes, expected {d}")
    hole = spec.get("hole")
    return DomainSpec(d, tuple(tuple(b) for b in box),
                      None if hole is None else tuple(tuple(b) for b in hole),
                      spec.get("container_padding", 0.25))


def _dim_vec(v, d, where):
    v = np.asarray(v, dtype=float)
    if v.shape != (d,):
        raise InputError(f"{where} must have length {d}")
    return v


def _build_matrix(spec, d):
    name = spec["preset"]
    if name == "identity":
        return IdentityMatrix(d)
    if name == "constant":
        return ConstantMatrix(np.asarray(spec["matrix"], dtype=float))
    return Checkerboard(np.asarray(spec.get("M1", np.eye(d)), dtype=float),
                        np.asarray(spec.get("M2", 10.0 * np.eye(d)), dtype=float),
                        spec.get("cell", 0.5))


def _build_vector(spec, d, where):
    name = spec["preset"]
    if name == "zero":
        field = ZeroVector(d)
    elif name == "constant":
        field = ConstantVector(_dim_vec(spec.get("vector", [0.0] * d), d, f"{where}.vector"))
    elif name == "gradient_bump":
        center = _dim_vec(spec.get("center", [0.5] * d), d, f"{where}.center")
        field = preset_gradient_bump(center, spec.get("radius", 0.6),
                                     spec.get("amplitude", math.log(2.0)))[1]
    elif name == "counterexample":
        field = preset_counterexample(d)[1]
    else:
        center = spec.get("center")
        field = preset_skew_example(d, None if center is None else
                                    _dim_vec(center, d, f"{where}.center"))[1]
    scale = spec.get("scale", 1.0)
    return field if scale == 1.0 else ScaledVector(field, float(scale))


def _build_scalar(spec, d, domain, where, A=None, H1=None):
    name = spec["preset"]
    if name == "constant":
        return Constant(float(spec.get("value", 0.0)))
    if name == "bump":
        return Bump(_dim_vec(spec.get("center", [0.5] * d), d, f"{where}.center"),
                    spec.get("radius", 0.6), spec.get("amplitude", 1.0))
    if name == "product_sine":
        return ProductSine(domain.inner_box, spec.get("amplitude", 1.0))
    if name == "perimeter_wave":
        if d != 2:
            raise InputError(f"{where}: perimeter_wave is defined for dim 2")
        return PerimeterWave(domain.inner_box, spec.get("frequency", 1.0))
    if name == "counterexample_w":
        return CounterexampleW(d)
    # manufactured load for u = amplitude * prod sin on the inner box
    if not isinstance(A, (IdentityMatrix, ConstantMatrix)):
        raise InputError(f"{where}: manufactured load needs a constant matrix A")
    if not isinstance(H1, (ZeroVector, ConstantVector)):
        raise InputError(f"{where}: manufactured load needs a constant or zero H1")
    Am = np.eye(d) if isinstance(A, IdentityMatrix) else A.matrix
    H = np.zeros(d) if isinstance(H1, ZeroVector) else H1.vector
    return ManufacturedLoad(ProductSine(domain.inner_box, spec.get("amplitude", 1.0)), Am, H, 0.0)


def build_problem(cfg) -> ProblemSpec:
    """``ProblemSpec`` from the ``problem`` section of a validated config."""
    if "problem" not in cfg:
        raise InputError("config error at <root>: 'problem' is required for this command")
    p = cfg["problem"]
    domain = _build_domain(p["domain"])
    d = domain.dim
    A = _build_matrix(p.get("A", {"preset": "identity"}), d)
    H1 = _build_vector(p.get("H1", {"preset": "zero"}), d, "problem.H1")
    H2 = _build_vector(p.get("H2", {"preset": "zero"}), d, "problem.H2")
    div_H2 = _build_scalar(p.get("div_H2", {"preset": "constant", "value": 0.0}), d, domain,
                           "problem.div_H2")
    f = _build_scalar(p.get("f", {"preset": "constant", "value": 1.0}), d, domain, "problem.f",
                      A, H1)
    c = _build_scalar(p.get("c", {"preset": "constant", "value": 0.0}), d, domain, "problem.c")
    hv = p.get("hole_values")
    kw = {}
    if "thetas" in p:
        kw["thetas"] = tuple(_real_value(t) for t in p["thetas"])
    if "positivity_floor" in p:
        kw["positivity_floor"] = p["positivity_floor"]
    return ProblemSpec.simple(
        domain, A=A, H1=H1, H2=H2, div_H2=div_H2, f=f, c=c,
        c_class=p.get("c_class", "L1"), alpha=p.get("alpha", 0.0),
        q=_real_value(p.get("q", "inf")), x1=p.get("x1"), mesh_n=p.get("mesh_n", 16),
        solver=SolveOptions(**p.get("solver", {})),
        hole_values=None if hv is None else _build_scalar(hv, d, domain, "problem.hole_values"),
        **kw)


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


TABLE_COLUMNS = ("check", "h", "n", "measured", "bound", "passed")


def write_table(path, rows):
    extra = []
    for r in rows:
        for k in r:
            if k not in TABLE_COLUMNS and k not in extra:
                extra.append(k)
    cols = list(TABLE_COLUMNS) + extra
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)  # excel dialect: RFC 4180 quoting and CRLF
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in cols])


def output_paths(out):
    out = Path(out)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        out = Path(env) / out.name
    return out, out.with_suffix(".csv")


def _report_rows(rep, n=None, **extra):
    """One row for a single-level report, one per level for a ladder."""
    if not rep.refinement_trend or n is None:
        h = rep.refinement_trend[-1][0] if rep.refinement_trend else None
        return [{"check": rep.name, "h": h, "n": n, "measured": rep.measured,
                 "bound": rep.bound, "passed": rep.passed, **extra}]
    return [{"check": rep.name, "h": h, "n": k, "measured": v, "bound": rep.bound,
             "passed": rep.passed, **extra}
            for (h, v), k in zip(rep.refinement_trend, n)]


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _default_checks(problem):
    checks = ["divfree"]
    if problem.alpha > 0:
        checks.append("contraction")
    if problem.dim >= 3:
        checks.append("energy")
    return checks


def _run_checks(problem, names, run, seed):
    reports = []
    for name in names:
        if name == "divfree":
            reports.append(verify.check_divfree_identity(problem, run))
        elif name == "contraction":
            for t in problem.thetas:
                reports.append(verify.check_contraction(problem, t, run))
        elif name == "energy":
            reports.append(verify.check_energy_estimate(problem, run))
        elif name == "weak_max_principle":
            reports.append(verify.check_weak_max_principle(problem))
        elif name == "coercivity":
            reports.append(verify.check_shifted_coercivity(problem, seed=seed))
        elif name == "form_bound":
            reports.append(verify.check_form_bound(problem, seed=seed))
        elif name == "equivalence":
            reports.append(verify.check_equivalence(problem))
    return reports


def cmd_solve(cfg, args, checks_default=True):
    problem = build_problem(cfg)
    run = solve_problem(problem)
    sol, weight, transform, consts = run
    names = cfg.get("checks") or (_default_checks(problem) if checks_default else [])
    reports = _run_checks(problem, names, run, args.seed)
    report = {
        "command": args.command,
        "dim": problem.dim,
        "regime": OUTSIDE_REGIME if problem.dim < 3 else "d >= 3",
        "mesh": {"n": problem.mesh_n, "h": sol.mesh.h, "vertices": sol.mesh.num_vertices,
                 "elements": sol.mesh.num_elements},
        "constants": consts.to_dict(),
        "weight": weight.to_dict(),
        "transform": transform.to_dict(),
        "norms": sol.norms,
        "solve": sol.stats.to_dict(),
        "warnings": sol.warnings,
        "checks": [r.to_dict() for r in reports],
    }
    rows = []
    for r in reports:
        theta = r.extras.get("theta")
        rows += _report_rows(r, None, **({"theta": theta} if theta is not None else {}))
        rows[-1]["h"] = sol.mesh.h
        rows[-1]["n"] = problem.mesh_n
    return report, rows, reports


def cmd_verify(cfg, args):
    problem = build_problem(cfg)
    names = cfg.get("checks") or list(CHECKS)
    if problem.dim < 3:
        names = [n for n in names if n != "energy"]
    if problem.alpha <= 0:
        names = [n for n in names if n != "contraction"]
    return cmd_solve({**cfg, "checks": names}, args)


def cmd_rho(cfg, args):
    problem = build_problem(cfg)
    weight = construct_rho(problem)
    inner = weight.disc.inner
    report = {"command": "rho", "dim": problem.dim,
              "mesh": {"n": problem.mesh_n, "h": inner.h}, "weight": weight.to_dict(),
              "checks": []}
    rows = [{"check": "harnack_ratio", "h": inner.h, "n": problem.mesh_n,
             "measured": weight.harnack_ratio, "bound": None, "passed": None}]
    return report, rows, []


def _parse_list(text, conv):
    try:
        return [conv(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise InputError(f"cannot parse list {text!r}: {exc}") from exc


def cmd_study(cfg, args):
    st = dict(cfg.get("study", {}))
    if args.levels:
        st["levels"] = _parse_list(args.levels, int)
    if args.epsilons:
        st["epsilons"] = _parse_list(args.epsilons, _parse_fraction)
    if args.thetas:
        st["thetas"] = _parse_list(args.thetas, _real_value)
    name = args.name
    jobs = args.jobs
    rows, reports = [], []
    if name == "blowup":
        levels = st.get("levels", [8, 16, 32])
        rep = verify.blowup_study(levels, st.get("dim", 3), st.get("variant", "unpunctured"),
                                  jobs=jobs)
        reports.append(rep)
        col = "max_rho" if rep.extras["variant"] == "unpunctured" else "harnack_ratio"
        for r in rep.extras["rows"]:
            rows.append({"check": rep.name, "h": r["h"], "n": r["n"],
                         "measured": r.get(col), "bound": rep.bound, "passed": rep.passed,
                         "level": r["n"], col: r.get(col),
                         "positivity_failure": r["positivity_failure"] or None})
    elif name == "annulus":
        for eps in st.get("epsilons", [1 / 3, 1 / 7, 1 / 15]):
            dim = st.get("dim", 2)
            n = st["levels"][0] if st.get("levels") else None
            rep = verify.annulus_validation(eps, dim, n)
            reports.append(rep)
            ex = rep.extras
            rows.append({"check": rep.name, "h": rep.refinement_trend[0][0], "n": ex["n"],
                         "measured": rep.measured, "bound": rep.bound, "passed": rep.passed,
                         "epsilon": eps, "anchor_ratio": ex["anchor_ratio"],
                         "anchor_exact": ex["anchor_exact"],
                         "max_min_ratio": ex["max_min_ratio"]})
    elif name == "convergence":
        levels = st.get("levels", [8, 16, 32, 64])
        rep = verify.convergence_study(levels, st.get("dim", 2), st.get("drift"), jobs=jobs)
        reports.append(rep)
        for (h, e2), e1, n in zip(rep.refinement_trend, rep.extras["errors_H1"], levels):
            rows.append({"check": rep.name, "h": h, "n": n, "measured": rep.measured,
                         "bound": rep.bound, "passed": rep.passed, "level": n,
                         "error_L2": e2, "error_H1": e1})
    elif name == "mollifier":
        problem = build_problem(cfg)
        levels = st.get("levels", [4, 8, 16])
        rep = verify.mollifier_stability_study(problem, levels)
        reports.append(rep)
        for (h, diff), n, norm in zip(rep.refinement_trend, levels, rep.extras["norms"]):
            rows.append({"check": rep.name, "h": h, "n": problem.mesh_n,
                         "measured": rep.measured, "bound": rep.bound, "passed": rep.passed,
                         "level": n, "relative_difference": diff, "norm_L2": norm})
    elif name == "weak_max_principle":
        problem = build_problem(cfg)
        levels = st.get("levels", [8, 16, 32])
        rep = verify.check_weak_max_principle(problem, levels, jobs=jobs)
        reports.append(rep)
        rows += _report_rows(rep, levels)
    elif name == "subsolution":
        problem = build_problem(cfg)
        if problem.dim != 2:
            raise InputError("study subsolution uses the perimeter wave and needs dim 2")
        levels = st.get("levels", [16, 32, 64])
        bc = PerimeterWave(problem.domain.inner_box, st.get("frequency", 1.0))
        rep = verify.check_positive_part_subsolution(problem, bc, None, levels, jobs=jobs)
        reports.append(rep)
        rows += _report_rows(rep, levels)
    elif name == "contraction":
        problem = build_problem(cfg)
        run = solve_problem(problem)
        for t in st.get("thetas", list(problem.thetas)):
            rep = verify.check_contraction(problem, _real_value(t), run)
            reports.append(rep)
            rows.append({"check": rep.name, "h": run[0].mesh.h, "n": problem.mesh_n,
                         "measured": rep.measured, "bound": rep.bound, "passed": rep.passed,
                         "theta": rep.extras["theta"]})
    report = {"command": "study", "study": name, "parameters": st,
              "checks": [r.to_dict() for r in reports]}
    return report, rows, reports


def _parse_fraction(text):
    text = text.strip()
    if "/" in text:
        a, b = text.split("/", 1)
        return float(a) / float(b)
    return float(text)


def build_parser():
    ap = argparse.ArgumentParser(prog="driftfem", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required):
        p.add_argument("--config", required=config_required, help="JSON run configuration")
        p.add_argument("--out", default="report.json",
                       help="report path; the CSV table goes next to it")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for ladders")
        p.add_argument("--seed", type=int, default=None, help="seed for randomized checks")

    for name in ("solve", "rho", "verify"):
        common(sub.add_parser(name), True)
    sp = sub.add_parser("study")
    sp.add_argument("name", choices=STUDIES)
    common(sp, False)
    sp.add_argument("--levels", help="comma-separated mesh resolutions or mollifier levels")
    sp.add_argument("--epsilons", help="comma-separated hole sizes, fractions allowed")
    sp.add_argument("--thetas", help="comma-separated norm exponents, 'inf' allowed")
    return ap


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        cfg = load_config(args.config) if args.config else {}
        if args.seed is None:
            args.seed = cfg.get("seed", 0)
        if args.jobs < 1:
            raise InputError("--jobs must be >= 1")
        handler = {"solve": cmd_solve, "rho": cmd_rho, "verify": cmd_verify,
                   "study": cmd_study}[args.command]
        report, rows, reports = handler(copy.deepcopy(cfg), args)
        report["config"] = cfg
        passed = all(r.passed for r in reports)
        report["passed"] = passed
        out, table = output_paths(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(_jsonable(report), indent=2, allow_nan=False) + "\n",
                       encoding="utf-8")
        write_table(table, rows)
    except (InputError, NonFiniteFieldError) as exc:
        print(f"input error: {exc}", file=stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_NUMERICAL
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: measured={r.measured:.6g} "
              f"bound={r.bound:.6g}", file=stdout)
    print(f"wrote {out} and {table}", file=stdout)
    return EXIT_OK if passed else EXIT_CHECK


def main(argv=None):
    sys.exit(run(argv))
