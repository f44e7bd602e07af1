"""Per-element numerical kernels.

Every kernel exists twice: a vectorized numpy version (``*_numpy``) and a
loop version compiled with numba (``*_numba``). The public names point at the
numba version when numba is importable and not disabled through
``DRIFTFEM_DISABLE_NUMBA``. Both paths agree to rounding.

Global reductions are left to the callers (numpy pairwise sums), so the
choice of path never changes summation order of assembled quantities.
"""
import math

import numpy as np

from ._accel import HAS_NUMBA, njit

_FACT = np.array([1, 1, 2, 6, 24], dtype=np.int64)


# --------------------------------------------------------------------------
# element geometry
# --------------------------------------------------------------------------

def element_geometry_numpy(coords, simplices):
    """Signed volumes and barycentric-coordinate gradients.

    Returns ``(vol, grads)`` with ``vol`` of shape (ne,) (signed) and
    ``grads`` of shape (ne, d+1, d).
    """
    X = coords[simplices]
    d = coords.shape[1]
    E = X[:, 1:, :] - X[:, :1, :]
    det = np.linalg.det(E)
    Einv = np.linalg.inv(E)
    grads = np.empty((len(simplices), d + 1, d))
    grads[:, 1:, :] = np.swapaxes(Einv, 1, 2)
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
    return det / math.factorial(d), grads


@njit
def element_geometry_numba(coords, simplices):
    ne = simplices.shape[0]
    d = coords.shape[1]
    vol = np.empty(ne)
    grads = np.empty((ne, d + 1, d))
    E = np.empty((d, d))
    for e in range(ne):
        v0 = simplices[e, 0]
        for k in range(d):
            vk = simplices[e, k + 1]
            for a in range(d):
                E[k, a] = coords[vk, a] - coords[v0, a]
        if d == 2:
            det = E[0, 0] * E[1, 1] - E[0, 1] * E[1, 0]
            # grads[k+1] = column k of E^{-1}
            grads[e, 1, 0] = E[1, 1] / det
            grads[e, 1, 1] = -E[1, 0] / det
            grads[e, 2, 0] = -E[0, 1] / det
            grads[e, 2, 1] = E[0, 0] / det
            vol[e] = det / 2.0
        else:
            c00 = E[1, 1] * E[2, 2] - E[1, 2] * E[2, 1]
            c01 = E[1, 2] * E[2, 0] - E[1, 0] * E[2, 2]
            c02 = E[1, 0] * E[2, 1] - E[1, 1] * E[2, 0]
            det = E[0, 0] * c00 + E[0, 1] * c01 + E[0, 2] * c02
            # inverse = adj / det, adj[i, j] = cofactor[j, i]
            inv00 = c00 / det
            inv10 = c01 / det
            inv20 = c02 / det
            inv01 = (E[0, 2] * E[2, 1] - E[0, 1] * E[2, 2]) / det
            inv11 = (E[0, 0] * E[2, 2] - E[0, 2] * E[2, 0]) / det
            inv21 = (E[0, 1] * E[2, 0] - E[0, 0] * E[2, 1]) / det
            inv02 = (E[0, 1] * E[1, 2] - E[0, 2] * E[1, 1]) / det
            inv12 = (E[0, 2] * E[1, 0] - E[0, 0] * E[1, 2]) / det
            inv22 = (E[0, 0] * E[1, 1] - E[0, 1] * E[1, 0]) / det
            grads[e, 1, 0] = inv00
            grads[e, 1, 1] = inv10
            grads[e, 1, 2] = inv20
            grads[e, 2, 0] = inv01
            grads[e, 2, 1] = inv11
            grads[e, 2, 2] = inv21
            grads[e, 3, 0] = inv02
            grads[e, 3, 1] = inv12
            grads[e, 3, 2] = inv22
            vol[e] = det / 6.0
        for a in range(d):
            s = 0.0
            for k in range(1, d + 1):
                s += grads[e, k, a]
            grads[e, 0, a] = -s
    return vol, grads


# --------------------------------------------------------------------------
# local matrices
# --------------------------------------------------------------------------

def local_stiffness_numpy(vol, grads, A):
    """``K[e, i, j] = vol_e <A_e grad_j, grad_i>``."""
    return np.einsum("e,eia,eab,ejb->eij", vol, grads, A, grads, optimize=True)


@njit
def local_stiffness_numba(vol, grads, A):
    ne, nl, d = grads.shape
    K = np.empty((ne, nl, nl))
    Ag = np.empty(d)
    for e in range(ne):
        for j in range(nl):
            for a in range(d):
                s = 0.0
                for b in range(d):
                    s += A[e, a, b] * grads[e, j, b]
                Ag[a] = s
            for i in range(nl):
                s = 0.0
                for a in range(d):
                    s += grads[e, i, a] * Ag[a]
                K[e, i, j] = vol[e] * s
    return K


def local_drift_numpy(vol, grads, H):
    """``D[e, i] = vol_e / (d+1) * <H_e, grad_i>`` (one value per test index)."""
    nl = grads.shape[1]
    return (vol / nl)[:, None] * np.einsum("eia,ea->ei", grads, H)


@njit
def local_drift_numba(vol, grads, H):
    ne, nl, d = grads.shape
    D = np.empty((ne, nl))
    for e in range(ne):
        w = vol[e] / nl
        for i in range(nl):
            s = 0.0
            for a in range(d):
                s += grads[e, i, a] * H[e, a]
            D[e, i] = w * s
    return D


# --------------------------------------------------------------------------
# point location on Kuhn lattices
# --------------------------------------------------------------------------

def _perm_rank_numpy(order):
    m, d = order.shape
    rank = np.zeros(m, dtype=np.int64)
    for k in range(d):
        c = np.zeros(m, dtype=np.int64)
        for j in range(k + 1, d):
            c += order[:, j] < order[:, k]
        rank += c * _FACT[d - 1 - k]
    return rank


def locate_numpy(points, lo, step, idx_lo, ncell, elem_lookup):
    """Element containing each point, or -1 outside the meshed set."""
    d = points.shape[1]
    t = (points - lo) / step - idx_lo
    cell = np.floor(t).astype(np.int64)
    # upper faces belong to the last cell
    top = cell == ncell
    cell[top & np.isclose(t, ncell, rtol=0.0, atol=1e-12)] -= 1
    inside = np.all((cell >= 0) & (cell < ncell), axis=1)
    out = np.full(len(points), -1, dtype=np.int64)
    if not inside.any():
        return out
    ci = cell[inside]
    frac = t[inside] - ci
    order = np.argsort(-frac, axis=1, kind="stable")
    rank = _perm_rank_numpy(order)
    flat = np.zeros(len(ci), dtype=np.int64)
    for a in range(d):
        flat = flat * ncell[a] + ci[:, a]
    out[inside] = elem_lookup[flat, rank]
    return out


@njit
def _locate_one(p, lo, step, idx_lo, ncell, elem_lookup, t, cell, order):
    d = p.shape[0]
    for a in range(d):
        t[a] = (p[a] - lo[a]) / step[a] - idx_lo[a]
        c = int(math.floor(t[a]))
        if c == ncell[a] and abs(t[a] - ncell[a]) <= 1e-12:
            c -= 1
        if c < 0 or c >= ncell[a]:
            return -1
        cell[a] = c
        t[a] -= c
    # stable sort of axes by descending fractional part
    for a in range(d):
        order[a] = a
    for a in range(1, d):
        k = order[a]
        b = a - 1
        while b >= 0 and t[order[b]] < t[k]:
            order[b + 1] = order[b]
            b -= 1
        order[b + 1] = k
    rank = 0
    fact = 1
    for k in range(d - 1, -1, -1):
        c = 0
        for j in range(k + 1, d):
            if order[j] < order[k]:
                c += 1
        rank += c * fact
        fact *= d - k
    flat = 0
    for a in range(d):
        flat = flat * ncell[a] + cell[a]
    return elem_lookup[flat, rank]


@njit
def locate_numba(points, lo, step, idx_lo, ncell, elem_lookup):
    m, d = points.shape
    out = np.empty(m, dtype=np.int64)
    t = np.empty(d)
    cell = np.empty(d, dtype=np.int64)
    order = np.empty(d, dtype=np.int64)
    for q in range(m):
        out[q] = _locate_one(points[q], lo, step, idx_lo, ncell, elem_lookup, t, cell, order)
    return out


# --------------------------------------------------------------------------
# discrete convolution of a piecewise-constant lattice field
# --------------------------------------------------------------------------

def gridded_convolution_numpy(targets, offsets, weights, lo, step, idx_lo, ncell,
                              elem_lookup, elem_vals, chunk=4096):
    """``out[q] = sum_k weights[k] * F(targets[q] - offsets[k])``.

    ``F`` is the per-element field ``elem_vals`` extended by zero outside the
    lattice mesh.
    """
    m = len(targets)
    out = np.zeros((m, elem_vals.shape[1]))
    per = max(1, chunk // max(1, len(offsets)))
    for s in range(0, m, per):
        pts = targets[s:s + per, None, :] - offsets[None, :, :]
        flat = pts.reshape(-1, pts.shape[-1])
        el = locate_numpy(flat, lo, step, idx_lo, ncell, elem_lookup)
        vals = np.where((el >= 0)[:, None], elem_vals[np.maximum(el, 0)], 0.0)
        vals = vals.reshape(pts.shape[0], len(offsets), -1)
        out[s:s + per] = np.einsum("k,qkc->qc", weights, vals)
    return out


@njit
def gridded_convolution_numba(targets, offsets, weights, lo, step, idx_lo, ncell,
                              elem_lookup, elem_vals):
    m, d = targets.shape
    nk = offsets.shape[0]
    nc = elem_vals.shape[1]
    out = np.zeros((m, nc))
    p = np.empty(d)
    t = np.empty(d)
    cell = np.empty(d, dtype=np.int64)
    order = np.empty(d, dtype=np.int64)
    for q in range(m):
        for k in range(nk):
            for a in range(d):
                p[a] = targets[q, a] - offsets[k, a]
            e = _locate_one(p, lo, step, idx_lo, ncell, elem_lookup, t, cell, order)
            if e >= 0:
                for c in range(nc):
                    out[q, c] += weights[k] * elem_vals[e, c]
    return out


if HAS_NUMBA:
    element_geometry = element_geometry_numba
    local_stiffness = local_stiffness_numba
    local_drift = local_drift_numba
    locate = locate_numba
    gridded_convolution = gridded_convolution_numba
else:
    element_geometry = element_geometry_numpy
    local_stiffness = local_stiffness_numpy
    local_drift = local_drift_numpy
    locate = locate_numpy
    gridded_convolution = gridded_convolution_numpy

BACKEND = "numba" if HAS_NUMBA else "numpy"
