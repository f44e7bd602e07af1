"""Norms, tail function, shift selection and the algebraic constants."""
from __future__ import annotations

import math
from typing import Callable, NamedTuple, Optional, Union

import numpy as np

from ..errors import InputError
from .coefficients import Field, GriddedScalar, GriddedVector, ScalarField, _check_finite
from .quadrature import quadrature_points, rule as _rule


class ElementScalar(ScalarField):
    """Piecewise-constant scalar given per element of a mesh."""

    kind = "element_scalar"

    def __init__(self, mesh, values):
        self.mesh = mesh
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (mesh.num_elements,):
            raise InputError("element scalar needs one value per mesh element")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        el = self.mesh.locate(flat)
        out = np.where(el >= 0, self.values[np.maximum(el, 0)], 0.0)
        return out.reshape(x.shape[:-1])

    def sample(self, mesh, lam):
        if mesh is self.mesh:
            return np.repeat(self.values[:, None], len(lam), axis=1)
        return super().sample(mesh, lam)

    def element_values(self, mesh):
        if mesh is self.mesh:
            return self.values.copy()
        return super().element_values(mesh)


def as_field(obj, mesh) -> Field:
    """Wrap nodal or per-element arrays living on ``mesh`` as fields."""
    if isinstance(obj, Field):
        return obj
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 1 and arr.shape[0] == mesh.num_vertices:
        return GriddedScalar(mesh, arr)
    if arr.ndim == 1 and arr.shape[0] == mesh.num_elements:
        return ElementScalar(mesh, arr)
    if arr.ndim == 2 and arr.shape == (mesh.num_elements, mesh.dim):
        return GriddedVector(mesh, arr)
    raise InputError(f"cannot interpret array of shape {arr.shape} as a field on this mesh")


Where = Union[None, np.ndarray, Callable[[np.ndarray], np.ndarray]]


def _element_mask(mesh, where: Where):
    if where is None:
        return None
    if callable(where):
        return np.asarray(where(mesh.barycenters), dtype=bool)
    mask = np.asarray(where, dtype=bool)
    if mask.shape != (mesh.num_elements,):
        raise InputError("element mask has the wrong length")
    return mask


def sample_magnitudes(field, mesh, rule="order2", where: Where = None):
    """``(|value|, weight)`` at all quadrature points, flattened."""
    f = as_field(field, mesh)
    lam, w = _rule(mesh.dim, rule)
    vals = f.sample(mesh, lam)
    mags = np.abs(vals) if vals.ndim == 2 else np.sqrt(np.sum(vals * vals, axis=-1))
    weights = mesh.volumes[:, None] * w[None, :]
    mask = _element_mask(mesh, where)
    if mask is not None:
        mags, weights = mags[mask], weights[mask]
    return np.ascontiguousarray(mags).ravel(), np.ascontiguousarray(weights).ravel()


def _power_sum(mags, weights, p, s=None):
    terms = weights * mags ** p
    if s is not None:
        terms = np.where(mags > s, terms, 0.0)
    return float(np.sum(terms))


def lp_norm(field, mesh, p, rule="order2", where: Where = None) -> float:
    """Quadrature L^p norm of a scalar or Euclidean norm of a vector field."""
    if not p >= 1:
        raise InputError(f"p must be >= 1, got {p}")
    mags, weights = sample_magnitudes(field, mesh, rule, where)
    if mags.size == 0:
        return 0.0
    top = float(np.max(mags))
    if p == math.inf or top == 0.0:
        return top
    # scale by the max so tiny or huge fields neither underflow nor overflow
    return top * _power_sum(mags / top, weights, p) ** (1.0 / p)


def _require_d3(d):
    if d < 3:
        raise InputError(f"this constant is defined for d >= 3, got d={d}")


def tail_phi(H, mesh, s, rule="order2", where: Where = None) -> float:
    """``(int 1{|H| > s} |H|^d)^(2/d)`` with a strict indicator."""
    d = mesh.dim
    _require_d3(d)
    if s < 0:
        raise InputError("s must be >= 0")
    mags, weights = sample_magnitudes(H, mesh, rule, where)
    return _power_sum(mags, weights, d, s) ** (2.0 / d)


def shift_threshold(d, lam) -> float:
    _require_d3(d)
    return lam ** 2 / 16.0 * ((d - 2) / (d - 1)) ** 2


class Shift(NamedTuple):
    N: float
    gamma: float


def select_shift(H, mesh, lam, d=None, rule="order2") -> Shift:
    """Smallest sampled magnitude ``N`` with ``tail_phi(N)`` below the threshold."""
    d = mesh.dim if d is None else d
    _require_d3(d)
    if d != mesh.dim:
        raise InputError(f"d={d} does not match mesh dimension {mesh.dim}")
    if not lam > 0:
        raise InputError("lambda must be positive")
    thr = shift_threshold(d, lam)
    mags, weights = sample_magnitudes(H, mesh, rule)
    cand = np.unique(np.concatenate([[0.0], mags]))
    lo, hi = 0, len(cand) - 1
    # tail is nonincreasing in s and vanishes at the largest candidate
    while lo < hi:
        mid = (lo + hi) // 2
        if _power_sum(mags, weights, d, cand[mid]) ** (2.0 / d) <= thr:
            hi = mid
        else:
            lo = mid + 1
    N = float(cand[lo])
    return Shift(N, N * N / lam)


def sobolev_constant(d: int) -> float:
    _require_d3(d)
    return 2.0 * (d - 1) / (d - 2)


def poincare_constant(d: int, volume: float) -> float:
    _require_d3(d)
    if not volume > 0:
        raise InputError("volume must be positive")
    return 2.0 * (d - 1) / d * volume ** (1.0 / d)


def form_bound_K(d: int, M: float, hnorm_d: float) -> float:
    _require_d3(d)
    if not M > 0:
        raise InputError("M must be positive")
    if not hnorm_d >= 0:
        raise InputError("hnorm_d must be >= 0")
    return d * M + sobolev_constant(d) * hnorm_d


class AdmissibleRadius(NamedTuple):
    radius: float
    satisfied: bool


def admissible_radius(H, mesh, x, lam, rule="order2") -> AdmissibleRadius:
    """Largest dyadic ``r`` with ``S_d * |H|_{L^d(B_2r(x))} <= lam/4``."""
    d = mesh.dim
    _require_d3(d)
    x = np.asarray(x, dtype=float)
    if mesh.locate(x[None, :])[0] < 0:
        raise InputError(f"point {x.tolist()} is outside the meshed domain")
    pts, wts, _ = quadrature_points(mesh, rule)
    lam_b, _ = _rule(d, rule)
    vals = as_field(H, mesh).sample(mesh, lam_b)
    mags = np.sqrt(np.sum(vals * vals, axis=-1)).ravel()
    dist = np.linalg.norm(pts - x, axis=-1).ravel()
    wts = wts.ravel()
    Sd = sobolev_constant(d)
    diam = float(np.linalg.norm(np.ptp(mesh.vertices, axis=0)))
    radii = []
    r = diam
    while r > mesh.h:
        radii.append(r)
        r /= 2.0
    radii.append(mesh.h)
    for r in radii:
        inside = dist < 2.0 * r
        norm = _power_sum(mags[inside], wts[inside], d) ** (1.0 / d)
        if Sd * norm <= lam / 4.0:
            return AdmissibleRadius(r, True)
    return AdmissibleRadius(mesh.h, False)


def weak_divergence_residual(H, div_H, mesh, rule="gm3"):
    """Max over interior hats of ``|int <H, grad psi> + int div_H psi|``.

    Returns ``(residual, l2_norm_of_H)`` under the same quadrature.
    """
    lam, w = _rule(mesh.dim, rule)
    pts = np.einsum("qi,eia->eqa", lam, mesh.vertices[mesh.simplices])
    Hq = _check_finite(H(pts), pts, "drift")
    wq = mesh.volumes[:, None] * w[None, :]
    # int_T <H, grad lambda_k> and int_T div * lambda_k
    flux = np.einsum("eq,eqa,eka->ek", wq, Hq, mesh.grads)
    if div_H is not None:
        dq = _check_finite(div_H(pts), pts, "divergence")
        flux = flux + np.einsum("eq,eq,qk->ek", wq, dq, lam)
    res = np.bincount(mesh.simplices.ravel(), weights=flux.ravel(),
                      minlength=mesh.num_vertices)
    interior = mesh.interior_vertices
    r = float(np.max(np.abs(res[interior]))) if len(interior) else 0.0
    l2 = math.sqrt(float(np.sum(wq * np.sum(Hq * Hq, axis=-1))))
    return r, l2
