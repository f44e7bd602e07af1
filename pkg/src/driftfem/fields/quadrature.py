"""Quadrature rules on simplices in barycentric coordinates."""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from ..errors import InputError


def _compositions(total, parts):
    """All tuples of ``parts`` nonnegative integers summing to ``total``."""
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for c in cuts:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 1 - prev - 1)
        yield tuple(out)


@lru_cache(maxsize=None)
def grundmann_moeller(dim: int, s: int):
    """Grundmann-Moeller rule of degree ``2s + 1``.

    Returns barycentric points (nq, dim+1) and weights (nq,) summing to 1
    (weights are relative to the simplex volume).
    """
    pts, wts = [], []
    d = dim
    for i in range(s + 1):
        q = 2 * s + 1
        denom = d + q - 2 * i
        w = ((-1) ** i * 2.0 ** (-2 * s) * denom ** q
             / (math.factorial(i) * math.factorial(d + q - i)))
        for beta in _compositions(s - i, d + 1):
            pts.append([(2 * b + 1) / denom for b in beta])
            wts.append(w * math.factorial(d))
    pts = np.array(pts)
    wts = np.array(wts)
    return pts, wts


@lru_cache(maxsize=None)
def rule(dim: int, name="order2"):
    """Barycentric points and relative weights of a named rule.

    ``barycenter``: one point, exact for linears. ``order2``: ``dim+1``
    interior points, exact for quadratics. ``gm<s>``: Grundmann-Moeller of
    degree ``2s+1``.
    """
    nl = dim + 1
    if name == "barycenter":
        return np.full((1, nl), 1.0 / nl), np.ones(1)
    if name == "order2":
        if dim == 2:
            a, b = 2.0 / 3.0, 1.0 / 6.0
        elif dim == 3:
            a, b = 0.5854101966249685, 0.1381966011250105
        else:
            raise InputError(f"order2 rule not tabulated for dim={dim}")
        pts = np.full((nl, nl), b)
        np.fill_diagonal(pts, a)
        return pts, np.full(nl, 1.0 / nl)
    if name.startswith("gm"):
        return grundmann_moeller(dim, int(name[2:]))
    raise InputError(f"unknown quadrature rule {name!r}")


def quadrature_points(mesh, name="order2", elements=None):
    """Physical points (ne, nq, d), absolute weights (ne, nq), barycentric (nq, d+1)."""
    lam, w = rule(mesh.dim, name)
    simp = mesh.simplices if elements is None else mesh.simplices[elements]
    vol = mesh.volumes if elements is None else mesh.volumes[elements]
    X = mesh.vertices[simp]
    pts = np.einsum("qi,eia->eqa", lam, X)
    return pts, vol[:, None] * w[None, :], lam
