"""Numerical checks and refinement studies.

Every check returns a :class:`CheckReport`. Its ``passed`` flag is
recomputable from the stored fields with :func:`recompute_pass`.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from statistics import median
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import assembly
from .errors import InputError, PositivityFailure
from .fields import (
    Checkerboard,
    Constant,
    ConstantVector,
    DriftSpec,
    IdentityMatrix,
    ManufacturedLoad,
    ProductSine,
    ZeroVector,
    form_bound_K,
    lp_norm,
    mollify,
    preset_counterexample,
    preset_skew_example,
    select_shift,
)
from .fields.quadrature import rule as quad_rule
from .linsolve import SolveOptions, solve
from .mesh import DomainSpec, build_mesh
from .pipeline import (
    ProblemSpec,
    construct_rho,
    divfree_transform,
    solve_problem,
    solve_transformed,
    solve_untransformed,
)

TREND_EPS = 1e-12


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one check.

    ``criterion`` names the pass rule (see :data:`CRITERIA`); ``relative``
    is ``measured <= bound * (1 + tolerance)``. ``refinement_trend`` holds
    ``(h, measured)`` pairs ordered by decreasing ``h``.
    """

    name: str
    passed: bool
    measured: float
    bound: float
    tolerance: float
    refinement_trend: Tuple[Tuple[float, float], ...] = ()
    notes: str = ""
    criterion: str = "relative"
    extras: Dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "name": self.name, "passed": self.passed, "measured": self.measured,
            "bound": self.bound, "tolerance": self.tolerance,
            "refinement_trend": [list(p) for p in self.refinement_trend],
            "notes": self.notes, "criterion": self.criterion, "extras": self.extras,
        }


def _trend_values(trend):
    return [v for _, v in trend]


def _nonincreasing(vals, slack=0.0):
    return all(b <= a * (1.0 + slack) + TREND_EPS for a, b in zip(vals, vals[1:]))


def _halving(vals):
    return len(vals) > 1 and all(b <= 0.5 * a for a, b in zip(vals, vals[1:]))


CRITERIA: Dict[str, Callable] = {
    "relative": lambda m, b, t, tr, ex: m <= b * (1.0 + t),
    "absolute": lambda m, b, t, tr, ex: m <= b + t,
    "absolute_or_halving": lambda m, b, t, tr, ex: m <= b + t or _halving(_trend_values(tr)),
    "relative_and_trend": lambda m, b, t, tr, ex: (
        m <= b * (1.0 + t) and _nonincreasing(_trend_values(tr), ex.get("trend_slack", 0.0))),
    "at_least_or_flag": lambda m, b, t, tr, ex: (
        m >= b * (1.0 - t) or ex.get("positivity_failure") is not None),
}


def recompute_pass(report: CheckReport) -> bool:
    """Pass flag as a pure function of the stored report fields."""
    rule = CRITERIA[report.criterion]
    return bool(rule(report.measured, report.bound, report.tolerance,
                     report.refinement_trend, report.extras))


def make_report(name, measured, bound, tolerance, trend=(), notes="", criterion="relative",
                extras=None) -> CheckReport:
    trend = tuple(sorted(((float(h), float(v)) for h, v in trend), key=lambda p: -p[0]))
    rep = CheckReport(name, False, float(measured), float(bound), float(tolerance), trend,
                      notes, criterion, dict(extras or {}))
    return replace(rep, passed=recompute_pass(rep))


def _map(fn, items, jobs=1):
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def _with_n(problem: ProblemSpec, n: int) -> ProblemSpec:
    return replace(problem, mesh_n=int(n))


def _levels(problem, levels):
    return [problem.mesh_n] if levels is None else [int(n) for n in levels]


# --------------------------------------------------------------------------
# maximum principle and subsolutions
# --------------------------------------------------------------------------

def _wmp_level(args):
    problem, flip = args
    sol = solve_untransformed(problem)
    u = -sol.u if flip else sol.u
    top = float(np.max(np.abs(u)))
    return sol.mesh.h, (max(0.0, float(np.max(u))) / top if top > 0 else 0.0)


def check_weak_max_principle(problem: ProblemSpec, levels=None, flip=False, jobs=1) -> CheckReport:
    """Positive excursion of the solution for a nonpositive load.

    With ``flip=True`` the load must be nonnegative and the excursion of
    ``-u`` is measured instead.
    """
    mesh = build_mesh(problem.domain, _levels(problem, levels)[0])
    fb = assembly._element_array(problem.f, mesh, (), "load")
    if (not flip and np.any(fb > 0)) or (flip and np.any(fb < 0)):
        e = int(np.argmax(fb) if not flip else np.argmin(fb))
        raise InputError(f"load has the wrong sign in element {e} for the maximum principle check")
    ce = assembly._element_array(problem.c, mesh, (), "zero-order coefficient")
    if np.any(ce < 0):
        raise InputError(f"c is negative in element {int(np.argmin(ce))}")
    res = _map(_wmp_level, [(_with_n(problem, n), flip) for n in _levels(problem, levels)], jobs)
    return make_report("weak_max_principle", res[-1][1], 0.0, 1e-8, res,
                       notes="excursion = max(0, max u) / max|u|",
                       criterion="absolute_or_halving")


def _subsolution_level(args):
    problem, boundary_fn, g = args
    mesh = build_mesh(problem.domain, problem.mesh_n)
    B = (assembly.assemble_stiffness(mesh, problem.A)
         + assembly.assemble_drift_on_test(mesh, problem.drift.total))
    load = assembly.assemble_load(mesh, g)
    system = assembly.apply_dirichlet(B, load, mesh, boundary_fn)
    x, _ = solve(system.matrix, system.rhs, problem.solver)
    u = system.expand(x)
    up = np.maximum(u, 0.0)
    grad = mesh.p1_gradient(up)
    h1 = math.sqrt(float(np.sum(mesh.volumes * np.sum(grad * grad, axis=1)))
                   + lp_norm(up, mesh, 2) ** 2)
    if h1 == 0.0:
        return mesh.h, 0.0
    rows = (B @ up)[mesh.interior_vertices]
    return mesh.h, max(0.0, float(np.max(rows))) / h1 if len(rows) else 0.0


def check_positive_part_subsolution(problem: ProblemSpec, boundary_fn, g=None, levels=None,
                                    bound=0.02, jobs=1) -> CheckReport:
    """Residual of the drift-on-test form applied to the nodal positive part."""
    g = Constant(0.0) if g is None else g
    mesh = build_mesh(problem.domain, _levels(problem, levels)[0])
    gb = assembly._element_array(g, mesh, (), "load")
    if np.any(gb > 0):
        raise InputError(f"load g is positive in element {int(np.argmax(gb))}")
    res = _map(_subsolution_level,
               [(_with_n(problem, n), boundary_fn, g) for n in _levels(problem, levels)], jobs)
    return make_report("positive_part_subsolution", res[-1][1], bound, 0.0, res,
                       notes="max_i (B_h u+)_i normalized by |u+|_H1",
                       criterion="relative_and_trend")


# --------------------------------------------------------------------------
# estimates from the transformed solve
# --------------------------------------------------------------------------

def check_contraction(problem: ProblemSpec, theta, run=None) -> CheckReport:
    """``|u|_theta * alpha / (K1 * |f|_theta)`` against 1."""
    if not problem.alpha > 0:
        raise InputError("contraction check needs alpha > 0")
    mesh = build_mesh(problem.domain, problem.mesh_n)
    ce = assembly._element_array(problem.c, mesh, (), "zero-order coefficient")
    if np.any(ce < problem.alpha):
        e = int(np.argmin(ce))
        raise InputError(f"c = {ce[e]:.6g} is below alpha = {problem.alpha:g} in element {e}")
    sol, weight, _, _ = solve_problem(problem) if run is None else run
    t = float(theta)
    ut = sol.norms["Linf"] if t == math.inf else lp_norm(sol.u, sol.mesh, t)
    ft = lp_norm(problem.f, sol.mesh, t)
    measured = ut * problem.alpha / (weight.harnack_ratio * ft) if ft > 0 else 0.0
    return make_report(f"contraction_theta_{'inf' if t == math.inf else f'{t:g}'}", measured,
                       1.0, 0.05, extras={"theta": "inf" if t == math.inf else t,
                                          "harnack_ratio": weight.harnack_ratio,
                                          "alpha": problem.alpha})


def check_energy_estimate(problem: ProblemSpec, run=None) -> CheckReport:
    """``|grad u|_L2 / (K5 * |f|_{L^{2d/(d+2)}})`` against 1."""
    d = problem.dim
    if d < 3:
        raise InputError("energy estimate check is defined for d >= 3")
    sol, weight, _, rep = solve_problem(problem) if run is None else run
    f_norm = lp_norm(problem.f, sol.mesh, 2.0 * d / (d + 2))
    measured = sol.norms["H1_0"] / (rep.derived_K5 * f_norm) if f_norm > 0 else 0.0
    return make_report("energy_estimate", measured, 1.0, 0.1,
                       extras={"derived_K5": rep.derived_K5,
                               "harnack_ratio": weight.harnack_ratio})


def check_divfree_identity(problem: ProblemSpec, run=None) -> CheckReport:
    _, weight, transform, _ = solve_problem(problem) if run is None else run
    bound = 10.0 * problem.solver.rel_tol
    return make_report("divfree_identity", transform.divfree_residual, bound, 0.0,
                       extras={"solver_residual": weight.stats.final_residual})


def check_equivalence(problem: ProblemSpec, levels=None) -> CheckReport:
    """Transformed and untransformed nodal solutions agree up to ``10 (h + tol)``."""
    trend = []
    last = None
    for n in _levels(problem, levels):
        p = _with_n(problem, n)
        sol_t, _, _, _ = solve_problem(p)
        sol_u = solve_untransformed(p, sol_t.mesh)
        scale = max(float(np.max(np.abs(sol_u.u))), 1e-300)
        diff = float(np.max(np.abs(sol_t.u - sol_u.u))) / scale
        trend.append((sol_t.mesh.h, diff))
        last = (sol_t.mesh.h, diff)
    h, diff = last
    bound = 10.0 * (h + problem.solver.rel_tol)
    return make_report("formulation_equivalence", diff, bound, 0.0, trend,
                       notes="relative max-norm difference of the two discrete solutions")


# --------------------------------------------------------------------------
# coercivity and form bound
# --------------------------------------------------------------------------

def _form_matrices(problem, mesh):
    He = assembly._element_array(problem.drift.total, mesh, (mesh.dim,), "drift")
    B = assembly.assemble_stiffness(mesh, problem.A) + assembly.assemble_drift_on_test(mesh, He)
    S = assembly.assemble_stiffness(mesh, IdentityMatrix(mesh.dim))
    M = assembly.assemble_mass(mesh, 1.0)
    I = mesh.interior_vertices
    return He, B[I][:, I], S[I][:, I], M[I][:, I]


def _random_vectors(mesh, nvec, rng):
    """Half white noise, half smooth random sine combinations on interior vertices."""
    I = mesh.interior_vertices
    X = mesh.vertices[I]
    lo = mesh.lattice.lo
    span = mesh.lattice.span
    out = []
    for k in range(nvec):
        if k % 2 == 0:
            out.append(rng.standard_normal(len(I)))
        else:
            v = np.zeros(len(I))
            for _ in range(4):
                freq = rng.integers(1, 4, size=mesh.dim)
                v += rng.standard_normal() * np.prod(
                    np.sin(np.pi * freq * (X - lo) / span), axis=1)
            out.append(v)
    return out


def check_shifted_coercivity(problem: ProblemSpec, nvec=200, seed=0) -> CheckReport:
    """``xi B xi + gamma xi M xi >= (lam/2) xi S xi - 1e-9 |xi|^2`` on random ``xi``."""
    mesh = build_mesh(problem.domain, problem.mesh_n)
    He, B, S, M = _form_matrices(problem, mesh)
    lam = problem.A.lam
    shift = select_shift(He, mesh, lam, mesh.dim, "barycenter")
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for xi in _random_vectors(mesh, nvec, rng):
        lhs = xi @ (B @ xi) + shift.gamma * (xi @ (M @ xi))
        rhs = 0.5 * lam * (xi @ (S @ xi))
        worst = max(worst, (rhs - lhs) / (xi @ xi))
    return make_report("shifted_coercivity", worst, 0.0, 1e-9, criterion="absolute",
                       notes="max over samples of (lam/2 |xi|_S^2 - B_gamma(xi, xi)) / |xi|^2",
                       extras={"N": shift.N, "gamma": shift.gamma, "samples": nvec,
                               "seed": seed})


def check_form_bound(problem: ProblemSpec, nvec=200, seed=0) -> CheckReport:
    """``|xi B zeta| <= K |xi|_S |zeta|_S`` on random pairs, 5% slack."""
    mesh = build_mesh(problem.domain, problem.mesh_n)
    He, B, S, _ = _form_matrices(problem, mesh)
    K = form_bound_K(mesh.dim, problem.A.M, lp_norm(He, mesh, mesh.dim, "barycenter"))
    rng = np.random.default_rng(seed)
    vecs = _random_vectors(mesh, 2 * nvec, rng)
    worst = 0.0
    for xi, zeta in zip(vecs[0::2], vecs[1::2]):
        val = abs(xi @ (B @ zeta))
        worst = max(worst, val / (K * math.sqrt((xi @ (S @ xi)) * (zeta @ (S @ zeta)))))
    return make_report("form_bound", worst, 1.0, 0.05, extras={"K": K, "samples": nvec})


# --------------------------------------------------------------------------
# mollification
# --------------------------------------------------------------------------

def mollifier_norm_study(H, outer: DomainSpec, inner: DomainSpec, levels=(2, 4, 8),
                         n_outer=16, n_inner=16, tol=1e-8) -> CheckReport:
    """``|H_n|_{L^d(V)} <= |H|_{L^d(W)}`` with ``V = inner`` nested in ``W = outer``."""
    W = build_mesh(outer, n_outer)
    V = build_mesh(inner, n_inner)
    d = W.dim
    ref = lp_norm(H, W, d)
    trend = []
    for n in levels:
        Hn = mollify(H, n, V, domain=W)
        trend.append((1.0 / n, lp_norm(Hn, V, d, "barycenter")))
    measured = max(v for _, v in trend)
    return make_report("mollifier_norm", measured, ref, tol, trend, criterion="absolute",
                       notes="max over levels of |H_n|_{L^d(V)} against |H|_{L^d(W)}",
                       extras={"levels": list(levels)})


def mollifier_stability_study(problem: ProblemSpec, levels=(4, 8, 16), slack=0.1,
                              bounded_factor=1.2) -> CheckReport:
    """Solutions with mollified drifts: bounded norms, shrinking differences."""
    mesh = build_mesh(problem.domain, problem.mesh_n)
    H = problem.drift.total
    base = solve_untransformed(problem, mesh)
    ref = lp_norm(base.u, mesh, 2)
    norms, trend = [], []
    for n in levels:
        Hn = mollify(H, n, mesh, domain=mesh)
        pn = replace(problem, drift=DriftSpec(Hn, ZeroVector(mesh.dim), Constant(0.0)))
        un = solve_untransformed(pn, mesh).u
        norms.append(lp_norm(un, mesh, 2))
        diff = lp_norm(un - base.u, mesh, 2) / ref if ref > 0 else 0.0
        trend.append((1.0 / n, diff))
    med = median(norms)
    measured = max(norms) / med if med > 0 else 1.0
    return make_report("mollifier_stability", measured, bounded_factor, 0.0, trend,
                       criterion="relative_and_trend",
                       notes="max |u_n| / median |u_n|; trend = |u_n - u| / |u|",
                       extras={"trend_slack": slack, "levels": list(levels),
                               "norms": norms})


# --------------------------------------------------------------------------
# counterexample studies
# --------------------------------------------------------------------------

def annulus_n(epsilon, target):
    """Even resolution nearest ``target`` that puts the hole faces on the lattice.

    Evenness keeps the coordinate axes on lattice lines so the anchor
    vertices ``eps e1`` and ``e1`` exist. Ties go to the finer mesh.
    """
    best = None
    for n in range(max(3, target // 2), 2 * target + 1):
        t = (1.0 + epsilon) / 2.0 * n
        if n % 2 == 0 and abs(t - round(t)) < 1e-9 and round(t) < n:
            key = (abs(n - target), -n)
            if best is None or key < best[0]:
                best = (key, n)
    if best is None:
        raise InputError(f"no lattice-compatible resolution near {target} for epsilon={epsilon}")
    return best[1]


def annulus_validation(epsilon, dim=2, n=None, bound=None) -> CheckReport:
    """Adjoint solve on ``[-1,1]^d`` minus ``[-eps,eps]^d`` against ``w = ln(1+1/r)/ln 2``."""
    if not 0 < epsilon < 1:
        raise InputError("epsilon must lie in (0, 1)")
    n = annulus_n(epsilon, 64 if dim == 2 else 32) if n is None else n
    bound = (0.03 if dim == 2 else 0.05) if bound is None else bound
    dom = DomainSpec.symmetric(dim, 1.0, epsilon)
    mesh = build_mesh(dom, n)
    w, H, _ = preset_counterexample(dim)
    B = (assembly.assemble_stiffness(mesh, IdentityMatrix(dim))
         + assembly.assemble_drift_on_test(mesh, H))
    system = assembly.apply_dirichlet(B, np.zeros(mesh.num_vertices), mesh, w)
    x, stats = solve(system.matrix, system.rhs)
    wh = system.expand(x)
    exact = w(mesh.vertices)
    err = float(np.max(np.abs(wh - exact)) / np.max(np.abs(exact)))
    e1 = np.zeros(dim)
    e1[0] = epsilon
    o1 = np.zeros(dim)
    o1[0] = 1.0
    anchor = float(wh[mesh.vertex_at(e1)] / wh[mesh.vertex_at(o1)])
    anchor_exact = math.log2(1.0 + 1.0 / epsilon)
    anchor_err = abs(anchor - anchor_exact) / anchor_exact
    return make_report(
        f"annulus_validation_eps_{epsilon:.6g}", max(err, anchor_err), bound, 0.0,
        [(mesh.h, err)],
        notes="max of relative L-inf error of w_h and relative anchor-ratio error",
        extras={"epsilon": epsilon, "n": n, "dim": dim, "relative_linf_error": err,
                "anchor_ratio": anchor, "anchor_exact": anchor_exact,
                "max_min_ratio": float(wh.max() / wh.min()),
                "max_min_ratio_exact": float(exact.max() / exact.min()),
                "solver_residual": stats.final_residual})


def _blowup_level(args):
    dim, n, variant = args
    d = dim
    x1 = [0.5] * d
    solver = SolveOptions(precondition="diagonal")
    if variant == "unpunctured":
        w, H, _ = preset_counterexample(d)
        problem = ProblemSpec.simple(DomainSpec.symmetric(d, 1.0), H1=H, mesh_n=n, x1=x1,
                                     solver=solver)
    elif variant == "punctured":
        w, H, _ = preset_counterexample(d)
        problem = ProblemSpec.simple(DomainSpec.symmetric(d, 1.0, 0.25), H1=H, mesh_n=n,
                                     x1=x1, solver=solver, hole_values=w)
    elif variant == "skew":
        _, H2 = preset_skew_example(d)
        problem = ProblemSpec.simple(DomainSpec.symmetric(d, 1.0), H2=H2, mesh_n=n, x1=x1,
                                     solver=solver)
    else:
        raise InputError(f"unknown blow-up variant {variant!r}")
    h = build_mesh(problem.domain, n).h
    try:
        weight = construct_rho(problem)
    except PositivityFailure as exc:
        return {"n": n, "h": h, "positivity_failure": str(exc)}
    return {"n": n, "h": h, "max_rho": weight.max_rho, "min_rho": weight.min_rho,
            "harnack_ratio": weight.harnack_ratio, "positivity_failure": None}


def blowup_study(levels=(8, 16, 32), dim=3, variant="unpunctured", jobs=1) -> CheckReport:
    """Weight for the counterexample drift across a refinement ladder.

    ``unpunctured``: passes if max rho grows by at least 1.15 per doubling or
    a positivity failure occurs. ``punctured``: passes if the Harnack ratio
    varies by at most 5%. ``skew``: passes if the Harnack ratio stays 1.
    """
    rows = _map(_blowup_level, [(dim, int(n), variant) for n in levels], jobs)
    failure = next((r["positivity_failure"] for r in rows if r["positivity_failure"]), None)
    ok = [r for r in rows if not r["positivity_failure"]]
    extras = {"variant": variant, "dim": dim, "levels": [r["n"] for r in rows],
              "positivity_failure": failure, "rows": rows}
    if variant == "unpunctured":
        vals = [r["max_rho"] for r in ok]
        ratios = [b / a for a, b in zip(vals, vals[1:])]
        measured = min(ratios) if ratios else 0.0
        extras["growth_ratios"] = ratios
        return make_report("blowup_unpunctured", measured, 1.15, 0.0,
                           [(r["h"], r["max_rho"]) for r in ok],
                           notes="min growth ratio of max rho per doubling",
                           criterion="at_least_or_flag", extras=extras)
    ks = [r["harnack_ratio"] for r in ok]
    if failure is not None or not ks:
        return make_report(f"blowup_{variant}", math.inf if not ks else max(ks), 0.0, 0.0,
                           notes="positivity failure on a drift that satisfies the admissibility condition",
                           criterion="absolute", extras=extras)
    trend = [(r["h"], r["harnack_ratio"]) for r in ok]
    if variant == "punctured":
        measured = (max(ks) - min(ks)) / min(ks)
        return make_report("blowup_punctured", measured, 0.05, 0.0, trend,
                           notes="relative variation of the Harnack ratio", extras=extras)
    measured = max(abs(k - 1.0) for k in ks)
    return make_report("blowup_skew", measured, 0.0, 1e-8, trend, criterion="absolute",
                       notes="max |K1 - 1| across the ladder", extras=extras)


# --------------------------------------------------------------------------
# manufactured convergence
# --------------------------------------------------------------------------

def _errors(mesh, u, exact):
    lam, w = quad_rule(mesh.dim, "gm3")
    pts = np.einsum("qi,eia->eqa", lam, mesh.vertices[mesh.simplices])
    wts = mesh.volumes[:, None] * w[None, :]
    uh = u[mesh.simplices] @ lam.T
    e2 = math.sqrt(max(0.0, float(np.sum(wts * (uh - exact(pts)) ** 2))))
    g = mesh.p1_gradient(u)[:, None, :] - exact.gradient(pts)
    e1 = math.sqrt(max(0.0, float(np.sum(wts * np.sum(g * g, axis=-1)))))
    return e2, e1


def _convergence_level(args):
    dim, n, drift, amplitude = args
    dom = DomainSpec.unit_box(dim)
    exact = ProductSine(dom.inner_box, amplitude)
    H = np.asarray(drift, dtype=float)
    f = ManufacturedLoad(exact, np.eye(dim), H, 0.0)
    problem = ProblemSpec.simple(dom, H1=ConstantVector(H), f=f, mesh_n=n)
    sol, _, _, _ = solve_problem(problem)
    e2, e1 = _errors(sol.mesh, sol.u, exact)
    return sol.mesh.h, e2, e1


def _rate(hs, errs):
    if min(errs) <= 0:
        return float("nan")
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def convergence_study(levels=(8, 16, 32, 64), dim=2, drift=None, amplitude=1.0,
                      jobs=1) -> CheckReport:
    """Least-squares L2 and H1 error rates for ``u = prod sin(pi x_k)``.

    ``measured = max(|rate_L2 - 2|, |rate_H1 - 1|) / 0.2``; passes at 1.
    """
    drift = [0.0] * dim if drift is None else list(drift)
    rows = _map(_convergence_level, [(dim, int(n), drift, amplitude) for n in levels], jobs)
    hs = [r[0] for r in rows]
    e2 = [r[1] for r in rows]
    e1 = [r[2] for r in rows]
    if max(e2) == 0.0 and max(e1) == 0.0:
        measured, r2, r1 = 0.0, None, None
    else:
        r2, r1 = _rate(hs, e2), _rate(hs, e1)
        measured = max(abs(r2 - 2.0), abs(r1 - 1.0)) / 0.2
        if not math.isfinite(measured):
            measured = math.inf
    return make_report("convergence", measured, 1.0, 0.0, list(zip(hs, e2)),
                       notes="trend holds L2 errors",
                       extras={"rate_L2": r2, "rate_H1": r1, "errors_L2": e2, "errors_H1": e1,
                               "levels": list(levels), "drift": drift})


# --------------------------------------------------------------------------
# standard test matrix
# --------------------------------------------------------------------------

def standard_bump(dim, center=None):
    """Gradient-bump drift used across the suite: radius 0.6, amplitude ln 2."""
    from .fields import preset_gradient_bump
    c = np.full(dim, 0.5) if center is None else np.asarray(center, dtype=float)
    return preset_gradient_bump(c, 0.6, math.log(2.0))


def standard_problem(dim, A="I", H="zero", n=8, **kw) -> ProblemSpec:
    """Problems of the compliant test matrix on ``[-1, 1]^dim``."""
    dom = DomainSpec.symmetric(dim, 1.0)
    if A == "I":
        Af = IdentityMatrix(dim)
    elif A == "checkerboard":
        Af = Checkerboard(np.eye(dim), 10.0 * np.eye(dim), 0.5)
    else:
        raise InputError(f"unknown matrix preset {A!r}")
    if H == "zero":
        drift = {}
    elif H == "bump":
        drift = {"H1": standard_bump(dim, np.full(dim, 0.2))[1]}
    elif H == "skew":
        drift = {"H2": preset_skew_example(dim)[1]}
    else:
        raise InputError(f"unknown drift preset {H!r}")
    kw.setdefault("f", 1.0)
    return ProblemSpec.simple(dom, A=Af, mesh_n=n, **drift, **kw)
