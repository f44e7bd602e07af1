"""P1 Galerkin assembly on Kuhn meshes with barycenter sampling."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import InputError, NegativeCoefficientWarning, NonFiniteFieldError
from .fields.coefficients import Field, ScalarField

PURGE_THRESHOLD = 1e-300


def _element_array(obj, mesh, shape, what):
    """Per-element samples of a field, or a validated per-element array."""
    if isinstance(obj, Field):
        vals = obj.element_values(mesh)
    elif np.isscalar(obj):
        vals = np.full((mesh.num_elements,) + shape, float(obj))
    else:
        vals = np.asarray(obj, dtype=float)
    vals = np.ascontiguousarray(np.broadcast_to(vals, (mesh.num_elements,) + shape), dtype=float)
    bad = ~np.isfinite(vals.reshape(mesh.num_elements, -1)).all(axis=1)
    if bad.any():
        e = int(np.flatnonzero(bad)[0])
        raise NonFiniteFieldError(
            f"{what} is not finite in element {e} (barycenter {mesh.barycenters[e].tolist()})",
            point=mesh.barycenters[e], element=e)
    return vals


def _to_csr(mesh, rows, cols, vals):
    n = mesh.num_vertices
    mat = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    mat.data[np.abs(mat.data) <= PURGE_THRESHOLD] = 0.0
    mat.eliminate_zeros()
    return mat


def _local_pattern(mesh):
    simp = mesh.simplices
    nl = simp.shape[1]
    rows = np.repeat(simp[:, :, None], nl, axis=2)
    cols = np.repeat(simp[:, None, :], nl, axis=1)
    return rows, cols


def assemble_stiffness(mesh, A, scale=None):
    """``(i, j) = sum_T vol <A_T grad phi_j, grad phi_i>``.

    ``A`` is a matrix field or per-element array; ``scale`` an optional
    per-element scalar multiplying ``A``.
    """
    d = mesh.dim
    Ae = _element_array(A, mesh, (d, d), "diffusion matrix")
    if scale is not None:
        Ae = Ae * _element_array(scale, mesh, (), "diffusion weight")[:, None, None]
    K = _kernels.local_stiffness(mesh.volumes, mesh.grads, Ae)
    rows, cols = _local_pattern(mesh)
    return _to_csr(mesh, rows, cols, K)


def local_drift(mesh, H):
    """``D[T, i] = vol_T / (d+1) * <H_T, grad phi_i>``."""
    He = _element_array(H, mesh, (mesh.dim,), "drift")
    return _kernels.local_drift(mesh.volumes, mesh.grads, He)


def assemble_drift_on_test(mesh, H):
    """``(i, j) = sum_T vol phi_j(b_T) <H_T, grad phi_i>``."""
    D = local_drift(mesh, H)
    nl = mesh.dim + 1
    rows, cols = _local_pattern(mesh)
    return _to_csr(mesh, rows, cols, np.repeat(D[:, :, None], nl, axis=2))


def assemble_drift_on_trial(mesh, H):
    """``(i, j) = sum_T vol <H_T, grad phi_j> phi_i(b_T)``; transpose of the test form."""
    D = local_drift(mesh, H)
    nl = mesh.dim + 1
    rows, cols = _local_pattern(mesh)
    return _to_csr(mesh, rows, cols, np.repeat(D[:, None, :], nl, axis=1))


def _warn_negative(ce, what):
    if np.any(ce < 0):
        e = int(np.argmin(ce))
        warnings.warn(f"{what} is negative ({ce[e]:.3g}) in element {e}",
                      NegativeCoefficientWarning, stacklevel=3)


def assemble_mass(mesh, c, lumped=True, scale=None):
    """Diagonal mass ``i -> sum_T vol c_T / (d+1)``.

    The vertex (trapezoidal) rule is used in both modes, so ``lumped=False``
    yields the same diagonal matrix.
    """
    ce = _element_array(c, mesh, (), "zero-order coefficient")
    if scale is not None:
        ce = ce * _element_array(scale, mesh, (), "mass weight")
    _warn_negative(ce, "zero-order coefficient")
    nl = mesh.dim + 1
    contrib = np.repeat((mesh.volumes * ce / nl)[:, None], nl, axis=1)
    diag = np.bincount(mesh.simplices.ravel(), weights=contrib.ravel(),
                       minlength=mesh.num_vertices)
    mat = sp.diags(diag, format="csr")
    mat.data[np.abs(mat.data) <= PURGE_THRESHOLD] = 0.0
    mat.eliminate_zeros()
    return mat


def element_average(mesh, nodal):
    return np.asarray(nodal, dtype=float)[mesh.simplices].mean(axis=1)


def assemble_load(mesh, f, weight=None):
    """``i -> sum_T vol rho_T f_T / (d+1)`` with ``rho_T`` the nodal average of ``weight``."""
    fe = _element_array(f, mesh, (), "load")
    if weight is not None:
        w = np.asarray(weight, dtype=float)
        if w.shape != (mesh.num_vertices,):
            raise InputError("weight must be nodal on the same mesh")
        fe = fe * element_average(mesh, w)
    nl = mesh.dim + 1
    contrib = np.repeat((mesh.volumes * fe / nl)[:, None], nl, axis=1)
    return np.bincount(mesh.simplices.ravel(), weights=contrib.ravel(),
                       minlength=mesh.num_vertices)


@dataclass
class AssembledSystem:
    """Linear system over free vertices after Dirichlet elimination.

    Attributes
    ----------
    matrix : csr_matrix (nfree, nfree)
    rhs : (nfree,) array, including lifted boundary data
    fixed_ids, fixed_vals : prescribed vertices and values
    free_index : (nv,) int array, matrix row of each vertex or -1 if fixed
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    fixed_ids: np.ndarray
    fixed_vals: np.ndarray
    free_index: np.ndarray

    @property
    def free_ids(self):
        return np.flatnonzero(self.free_index >= 0)

    @property
    def fixed_values(self):
        return dict(zip(self.fixed_ids.tolist(), self.fixed_vals.tolist()))

    def expand(self, x_free):
        """Full nodal vector from the free unknowns and the fixed values."""
        out = np.empty(len(self.free_index))
        out[self.fixed_ids] = self.fixed_vals
        out[self.free_ids] = x_free
        return out


def boundary_values(mesh, boundary_fn, ids):
    if boundary_fn is None:
        return np.zeros(len(ids))
    if isinstance(boundary_fn, ScalarField):
        vals = boundary_fn(mesh.vertices[ids])
    elif np.isscalar(boundary_fn):
        vals = np.full(len(ids), float(boundary_fn))
    else:
        arr = np.asarray(boundary_fn, dtype=float)
        if arr.shape != (mesh.num_vertices,):
            raise InputError("nodal boundary data must have one value per vertex")
        vals = arr[ids]
    vals = np.asarray(vals, dtype=float)
    if not np.all(np.isfinite(vals)):
        k = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise NonFiniteFieldError(
            f"boundary data is not finite at vertex {int(ids[k])} "
            f"({mesh.vertices[ids[k]].tolist()})", point=mesh.vertices[ids[k]])
    return vals


def apply_dirichlet(matrix, rhs, mesh, boundary_fn=None, fixed=None):
    """Eliminate prescribed vertices and lift their values into the rhs.

    ``fixed`` overrides the set of prescribed vertices (defaults to the mesh
    boundary).
    """
    A = sp.csr_matrix(matrix)
    b = np.asarray(rhs, dtype=float)
    nv = mesh.num_vertices
    if A.shape != (nv, nv) or b.shape != (nv,):
        raise InputError("matrix and rhs must be full nodal size")
    fixed_ids = mesh.boundary_vertices if fixed is None else np.unique(np.asarray(fixed))
    is_fixed = np.zeros(nv, dtype=bool)
    is_fixed[fixed_ids] = True
    free = np.flatnonzero(~is_fixed)
    g = boundary_values(mesh, boundary_fn, fixed_ids)
    A_ff = A[free][:, free].tocsr()
    rhs_free = b[free] - A[free][:, fixed_ids] @ g
    free_index = np.full(nv, -1, dtype=np.int64)
    free_index[free] = np.arange(len(free))
    return AssembledSystem(A_ff, rhs_free, fixed_ids, g, free_index)
