"""Mollification by a discretized smooth bump kernel."""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .. import _kernels
from ..errors import InputError
from .coefficients import GriddedVector, VectorField

# kernel sample points per unit radius
DEFAULT_POINTS_PER_RADIUS = {2: 10, 3: 6}


def eta(z):
    """Unnormalized profile ``exp(-1/(1 - |z|^2))`` for ``|z| < 1``, else 0."""
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1)
    out = np.zeros_like(r2)
    m = r2 < 1.0
    out[m] = np.exp(-1.0 / (1.0 - r2[m]))
    return out


@lru_cache(maxsize=None)
def _unit_stencil(dim, m):
    rng = range(-m, m + 1)
    k = np.array(list(itertools.product(rng, repeat=dim)), dtype=float) / m
    w = eta(k)
    keep = w > 0
    k, w = k[keep], w[keep]
    return k, w / np.sum(w)


def mollifier_stencil(dim, level, points_per_radius=None):
    """Offsets (nk, dim) inside the ball of radius ``1/level`` and weights summing to 1.

    The weights sample ``eta_n(z) = n^d eta(n z)`` on a uniform grid and are
    normalized to unit mass, so they are a discrete unit-mass kernel.
    """
    if level < 1:
        raise InputError("mollification level must be >= 1")
    m = points_per_radius or DEFAULT_POINTS_PER_RADIUS.get(dim, 6)
    k, w = _unit_stencil(dim, int(m))
    return k / level, w.copy()


def mollify(H, level, target, domain=None, points_per_radius=None, chunk=200_000):
    """Discrete convolution of the zero-extended ``H`` with ``eta_n``.

    Parameters
    ----------
    H : VectorField
        Field to mollify. A ``GriddedVector`` carries its own domain (its mesh).
    level : int
        Mollification level ``n``; the kernel is supported in radius ``1/n``.
    target : Mesh
        Values are computed at its element barycenters.
    domain : Mesh, optional
        Domain of ``H`` for analytic fields; ``H`` is treated as zero outside.
        Defaults to ``target``.

    Returns
    -------
    GriddedVector on ``target``.
    """
    offsets, weights = mollifier_stencil(target.dim, level, points_per_radius)
    bary = target.barycenters
    if isinstance(H, GriddedVector):
        src = H.mesh
        lat = src.lattice
        vals = _kernels.gridded_convolution(
            np.ascontiguousarray(bary), np.ascontiguousarray(offsets), weights,
            lat.lo, lat.step, lat.idx_lo.astype(float), lat.ncell.astype(np.int64),
            src.elem_lookup, np.ascontiguousarray(H.values))
        return GriddedVector(target, vals)
    if not isinstance(H, VectorField):
        raise InputError("mollify expects a vector field")
    src = target if domain is None else domain
    d = target.dim
    out = np.zeros((len(bary), d))
    per = max(1, chunk // len(offsets))
    for s in range(0, len(bary), per):
        pts = (bary[s:s + per, None, :] - offsets[None, :, :]).reshape(-1, d)
        inside = src.locate(pts) >= 0
        vals = np.zeros((len(pts), d))
        if inside.any():
            vals[inside] = H(pts[inside])
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(vals), axis=1))[0])
            from ..errors import NonFiniteFieldError
            raise NonFiniteFieldError(
                f"field is not finite at point {pts[bad].tolist()} during mollification",
                point=pts[bad])
        out[s:s + per] = np.einsum("k,qka->qa", weights, vals.reshape(-1, len(offsets), d))
    return GriddedVector(target, out)
