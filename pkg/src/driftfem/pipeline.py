"""Weight construction, divergence-free transformation and the transformed solve."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import assembly
from .errors import InputError, PositivityFailure
from .fields import (
    Constant,
    DriftSpec,
    ElementScalar,
    IdentityMatrix,
    MatrixField,
    ScalarField,
    ZeroVector,
    form_bound_K,
    lp_norm,
    poincare_constant,
    select_shift,
    sobolev_constant,
)
from .linsolve import SolveOptions, SolveStats, solve
from .mesh import DomainSpec, Mesh, build_mesh, container_mesh, inner_element_map

POSITIVITY_FLOOR = 1e-8
RESIDUAL_FLOOR = 1e-300
OUTSIDE_REGIME = "outside the d >= 3 regime; constants are defined for d >= 3 only"


@dataclass(eq=False)
class ProblemSpec:
    """Dirichlet problem ``-div(A grad u) + <H, grad u> + c u = f``, ``u = 0`` on the boundary.

    Parameters
    ----------
    domain : DomainSpec
    A : MatrixField
        Diffusion with declared bounds ``A.M`` and ``A.lam``.
    drift : DriftSpec
    c, f : ScalarField
    c_class : {"L1", "L2d/(d+2)"}
        Declared integrability class of ``c`` (both assemble identically).
    alpha : float
        Declared lower bound of ``c``.
    q : float
        Declared exponent of ``f``.
    x1 : point, optional
        Normalization vertex of the weight; defaults to the inner vertex
        nearest the centroid of the inner box.
    mesh_n : int
    solver : SolveOptions
    hole_values : ScalarField, optional
        Dirichlet data for the weight on the hole faces (default 1).
    thetas : sequence of float
        Exponents for the reported ``L^theta`` norms.
    """

    domain: DomainSpec
    A: MatrixField
    drift: DriftSpec
    f: ScalarField
    c: ScalarField = field(default_factory=lambda: Constant(0.0))
    c_class: str = "L1"
    alpha: float = 0.0
    q: float = math.inf
    x1: Optional[Sequence[float]] = None
    mesh_n: int = 16
    solver: SolveOptions = field(default_factory=SolveOptions)
    hole_values: Optional[ScalarField] = None
    thetas: Sequence[float] = (1.0, 2.0, math.inf)
    positivity_floor: float = POSITIVITY_FLOOR

    def __post_init__(self):
        if self.alpha < 0:
            raise InputError("alpha must be >= 0")
        if self.c_class not in ("L1", "L2d/(d+2)"):
            raise InputError(f"unknown c_class {self.c_class!r}")
        if not self.positivity_floor > 0:
            raise InputError("positivity_floor must be positive")

    @property
    def dim(self):
        return self.domain.dim

    @classmethod
    def simple(cls, domain, A=None, H1=None, H2=None, div_H2=None, f=1.0, c=0.0, **kw):
        """Convenience constructor with zero defaults."""
        d = domain.dim
        A = IdentityMatrix(d) if A is None else A
        drift = DriftSpec(ZeroVector(d) if H1 is None else H1,
                          ZeroVector(d) if H2 is None else H2,
                          Constant(0.0) if div_H2 is None else div_H2)
        f = Constant(f) if np.isscalar(f) else f
        c = Constant(c) if np.isscalar(c) else c
        return cls(domain=domain, A=A, drift=drift, f=f, c=c, **kw)


@dataclass(eq=False)
class Discretization:
    inner: Mesh
    container: Mesh
    vertex_map: np.ndarray
    element_map: np.ndarray


def discretize(domain: DomainSpec, n: int) -> Discretization:
    container, vmap = container_mesh(domain, n)
    inner = build_mesh(domain, n)
    return Discretization(inner, container, vmap, inner_element_map(inner, container))


@dataclass(eq=False)
class WeightResult:
    """Nodal weight on the container mesh, normalized to 1 at ``x1``."""

    rho: np.ndarray
    w: np.ndarray
    x1: np.ndarray
    x1_index: int
    harnack_ratio: float
    min_rho: float
    max_rho: float
    stats: SolveStats
    disc: Discretization

    @property
    def rho_inner(self):
        return self.rho[self.disc.vertex_map]

    def to_dict(self):
        return {"x1": self.x1.tolist(), "harnack_ratio": self.harnack_ratio,
                "min_rho": self.min_rho, "max_rho": self.max_rho,
                "stats": self.stats.to_dict()}


@dataclass(eq=False)
class TransformResult:
    B: np.ndarray
    fluxB: np.ndarray
    rho_bar: np.ndarray
    divfree_residual: float

    def to_dict(self):
        return {"divfree_residual": self.divfree_residual,
                "max_B": float(np.max(np.linalg.norm(self.B, axis=1))) if len(self.B) else 0.0}


@dataclass(eq=False)
class Solution:
    u: np.ndarray
    norms: Dict[str, float]
    stats: SolveStats
    mesh: Mesh
    warnings: List[str] = field(default_factory=list)

    def to_dict(self):
        return {"norms": self.norms, "stats": self.stats.to_dict(), "warnings": self.warnings}


@dataclass
class ConstantsReport:
    S_d: Optional[float]
    poincare: Optional[float]
    K: Optional[float]
    N: Optional[float]
    gamma: Optional[float]
    harnack_ratio: float
    derived_K5: Optional[float]
    energy_ratio: Optional[float]
    linf_ratio: Optional[float]
    contraction_ratios: Dict[str, Optional[float]]
    c_class: str
    reasons: Dict[str, str]

    def to_dict(self):
        return {
            "S_d": self.S_d, "poincare": self.poincare, "K": self.K, "N": self.N,
            "gamma": self.gamma, "harnack_ratio": self.harnack_ratio,
            "derived_K5": self.derived_K5, "energy_ratio": self.energy_ratio,
            "linf_ratio": self.linf_ratio, "contraction_ratios": dict(self.contraction_ratios),
            "c_class": self.c_class, "reasons": dict(self.reasons),
        }


# --------------------------------------------------------------------------
# weight
# --------------------------------------------------------------------------

def default_x1(mesh: Mesh, domain: DomainSpec):
    centroid = np.array([(a + b) / 2.0 for a, b in domain.inner_box])
    return mesh.nearest_vertex(centroid)


def _adjoint_matrix(problem, mesh):
    At = problem.A.transpose()
    D = assembly.assemble_drift_on_test(mesh, problem.drift.total)
    S = assembly.assemble_stiffness(mesh, At)
    return S + D, D


def construct_rho(problem: ProblemSpec, disc: Optional[Discretization] = None) -> WeightResult:
    """Positive weight solving the adjoint equation, normalized at ``x1``.

    Solves for ``v = w - 1`` with zero data on the outer container faces
    (``hole_values - 1`` on hole faces) and rhs ``-(D 1)``, where ``D`` is
    the drift-on-test matrix.
    """
    disc = discretize(problem.domain, problem.mesh_n) if disc is None else disc
    mesh = disc.container
    Badj, D = _adjoint_matrix(problem, mesh)
    rhs = -(D @ np.ones(mesh.num_vertices))
    g = np.zeros(mesh.num_vertices)
    if problem.hole_values is not None and problem.domain.hole is not None:
        ids = mesh.boundary_vertices
        lat = mesh.lattice
        on_hole = lat.in_closed_hole(mesh.lattice_index[ids])
        hole_ids = ids[on_hole]
        g[hole_ids] = assembly.boundary_values(mesh, problem.hole_values, hole_ids) - 1.0
    system = assembly.apply_dirichlet(Badj, rhs, mesh, g)
    v_free, stats = solve(system.matrix, system.rhs, problem.solver)
    w = system.expand(v_free) + 1.0
    wmax = float(np.max(w))
    k = int(np.argmin(w))
    if not (w[k] > problem.positivity_floor * wmax):
        raise PositivityFailure(
            f"weight is not positive: w = {w[k]:.3e} at vertex {k} "
            f"{mesh.vertices[k].tolist()} (floor {problem.positivity_floor:g} * max w)",
            node=k, point=mesh.vertices[k], value=float(w[k]))
    inner = disc.inner
    if problem.x1 is None:
        x1_inner = default_x1(inner, problem.domain)
    else:
        x1_inner = inner.vertex_at(problem.x1)
    x1c = int(disc.vertex_map[x1_inner])
    rho = w / w[x1c]
    ri = rho[disc.vertex_map]
    return WeightResult(
        rho=rho, w=w, x1=mesh.vertices[x1c].copy(), x1_index=x1c,
        harnack_ratio=harnack_ratio(rho, disc.vertex_map),
        min_rho=float(ri.min()), max_rho=float(ri.max()), stats=stats, disc=disc)


def harnack_ratio(weight, inner_map) -> float:
    """``max / min`` of the nodal weight over inner-domain vertices."""
    rho = weight.rho if isinstance(weight, WeightResult) else np.asarray(weight)
    ri = rho[np.asarray(inner_map)]
    return float(ri.max() / ri.min())


# --------------------------------------------------------------------------
# transformation
# --------------------------------------------------------------------------

def _inner_coefficients(problem, disc):
    """Per-element A and H on the inner mesh, taken from the container samples."""
    emap = disc.element_map
    Ae = assembly._element_array(problem.A, disc.container, (problem.dim,) * 2, "diffusion matrix")[emap]
    He = assembly._element_array(problem.drift.total, disc.container, (problem.dim,), "drift")[emap]
    return Ae, He


def divfree_transform(problem: ProblemSpec, weight: WeightResult) -> TransformResult:
    """``B = H + A^T grad rho / rho_bar`` and ``flux = rho_bar B`` per inner element."""
    disc = weight.disc
    inner = disc.inner
    rho = weight.rho_inner
    rho_bar = assembly.element_average(inner, rho)
    if np.any(rho_bar <= 0):
        e = int(np.argmin(rho_bar))
        raise PositivityFailure(f"element average of the weight is nonpositive in element {e}",
                                node=None, point=inner.barycenters[e], value=float(rho_bar[e]))
    Ae, He = _inner_coefficients(problem, disc)
    grad = inner.p1_gradient(rho)
    At_grad = np.einsum("eba,eb->ea", Ae, grad)
    flux = rho_bar[:, None] * He + At_grad
    B = He + At_grad / rho_bar[:, None]
    return TransformResult(B=B, fluxB=flux, rho_bar=rho_bar,
                           divfree_residual=divfree_residual(inner, flux))


def divfree_residual(mesh: Mesh, fluxB, floor=RESIDUAL_FLOOR) -> float:
    """``max_i |sum_T vol <flux, grad phi_i>| / (|flux|_L2 + floor)`` over interior vertices."""
    flux = np.asarray(fluxB, dtype=float)
    contrib = mesh.volumes[:, None] * np.einsum("ea,eka->ek", flux, mesh.grads)
    res = np.bincount(mesh.simplices.ravel(), weights=contrib.ravel(),
                      minlength=mesh.num_vertices)
    interior = mesh.interior_vertices
    if len(interior) == 0:
        return 0.0
    l2 = math.sqrt(float(np.sum(mesh.volumes * np.sum(flux * flux, axis=1))))
    return float(np.max(np.abs(res[interior])) / (l2 + floor))


# --------------------------------------------------------------------------
# solves
# --------------------------------------------------------------------------

def solution_norms(mesh: Mesh, u, thetas=(1.0, 2.0, math.inf)) -> Dict[str, float]:
    d = mesh.dim
    grad = mesh.p1_gradient(u)
    norms = {
        "H1_0": math.sqrt(float(np.sum(mesh.volumes * np.sum(grad * grad, axis=1)))),
        "L2": lp_norm(u, mesh, 2),
        "Linf": float(np.max(np.abs(u))) if len(u) else 0.0,
        "L2d/(d+2)": lp_norm(u, mesh, 2.0 * d / (d + 2)),
    }
    for t in thetas:
        norms[_theta_key(t)] = norms["Linf"] if t == math.inf else lp_norm(u, mesh, t)
    return norms


def _theta_key(t):
    return "Linf" if t == math.inf else f"L{t:g}"


def _solve_system(K, load, mesh, opts):
    system = assembly.apply_dirichlet(K, load, mesh, None)
    x, stats = solve(system.matrix, system.rhs, opts)
    u = system.expand(x)
    u[system.fixed_ids] = 0.0
    return u, stats


def transformed_matrix(problem, weight, transform):
    disc = weight.disc
    inner = disc.inner
    Ae, _ = _inner_coefficients(problem, disc)
    ce = assembly._element_array(problem.c, disc.container, (), "zero-order coefficient")[disc.element_map]
    rb = transform.rho_bar
    K = (assembly.assemble_stiffness(inner, Ae, scale=rb)
         + assembly.assemble_drift_on_trial(inner, transform.fluxB)
         + assembly.assemble_mass(inner, ce, scale=rb))
    load = assembly.assemble_load(inner, problem.f, weight=weight.rho_inner)
    return K, load


def solve_transformed(problem, weight, transform) -> Solution:
    inner = weight.disc.inner
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        K, load = transformed_matrix(problem, weight, transform)
    u, stats = _solve_system(K, load, inner, problem.solver)
    msgs = [str(w.message) for w in caught]
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    return Solution(u=u, norms=solution_norms(inner, u, problem.thetas), stats=stats,
                    mesh=inner, warnings=msgs)


def untransformed_matrix(problem, mesh):
    K = (assembly.assemble_stiffness(mesh, problem.A)
         + assembly.assemble_drift_on_trial(mesh, problem.drift.total)
         + assembly.assemble_mass(mesh, problem.c))
    return K, assembly.assemble_load(mesh, problem.f)


def solve_untransformed(problem: ProblemSpec, mesh: Optional[Mesh] = None) -> Solution:
    """Direct discretization ``stiffness(A) + drift_on_trial(H) + mass(c)``."""
    mesh = build_mesh(problem.domain, problem.mesh_n) if mesh is None else mesh
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        K, load = untransformed_matrix(problem, mesh)
    u, stats = _solve_system(K, load, mesh, problem.solver)
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    return Solution(u=u, norms=solution_norms(mesh, u, problem.thetas), stats=stats,
                    mesh=mesh, warnings=[str(w.message) for w in caught])


def constants_report(problem: ProblemSpec, weight: WeightResult, solution: Solution,
                     rule="order2") -> ConstantsReport:
    d = problem.dim
    inner = weight.disc.inner
    lam, M = problem.A.lam, problem.A.M
    reasons: Dict[str, str] = {}
    f_2d = lp_norm(problem.f, inner, 2.0 * d / (d + 2), rule)
    if d >= 3:
        H = problem.drift.total
        He = assembly._element_array(H, weight.disc.container, (d,), "drift")[weight.disc.element_map]
        Sd = sobolev_constant(d)
        poin = poincare_constant(d, problem.domain.volume)
        K = form_bound_K(d, M, lp_norm(He, inner, d, "barycenter"))
        shift = select_shift(He, inner, lam, d, "barycenter")
        N, gamma = shift.N, shift.gamma
        K5 = Sd * weight.harnack_ratio / lam
    else:
        Sd = poin = K = N = gamma = K5 = None
        for key in ("S_d", "poincare", "K", "N", "gamma", "derived_K5"):
            reasons[key] = OUTSIDE_REGIME
    energy = solution.norms["H1_0"] / f_2d if f_2d > 0 else None
    if energy is None:
        reasons["energy_ratio"] = "f vanishes"
    fq = lp_norm(problem.f, inner, problem.q, rule)
    linf = solution.norms["Linf"] / fq if fq > 0 else None
    if linf is None:
        reasons["linf_ratio"] = "f vanishes"
    contraction = {}
    for t in problem.thetas:
        key = _theta_key(t)
        ft = lp_norm(problem.f, inner, t, rule)
        if problem.alpha > 0 and ft > 0:
            contraction[key] = solution.norms[key] * problem.alpha / ft
        else:
            contraction[key] = None
            reasons[f"contraction_{key}"] = "alpha = 0" if problem.alpha <= 0 else "f vanishes"
    return ConstantsReport(Sd, poin, K, N, gamma, weight.harnack_ratio, K5, energy, linf,
                           contraction, problem.c_class, reasons)


def solve_problem(problem: ProblemSpec):
    """Weight, transformation, transformed solve and constants for one problem.

    Returns ``(Solution, WeightResult, TransformResult, ConstantsReport)``.
    """
    weight = construct_rho(problem)
    transform = divfree_transform(problem, weight)
    solution = solve_transformed(problem, weight, transform)
    return solution, weight, transform, constants_report(problem, weight, solution)
