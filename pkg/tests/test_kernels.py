"""The numba kernels and their numpy fallbacks must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from driftfem import _kernels as K
from driftfem._accel import HAS_NUMBA
from driftfem.fields import mollifier_stencil
from driftfem.mesh import DomainSpec, build_mesh

needs_numba = pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")


@pytest.fixture(params=[2, 3])
def mesh(request):
    return build_mesh(DomainSpec.symmetric(request.param, 1.0, 0.5), 4)


def _grid(mesh):
    lat = mesh.lattice
    return (lat.lo, lat.step, lat.idx_lo.astype(float), lat.ncell.astype(np.int64),
            mesh.elem_lookup)


@needs_numba
def test_geometry_agrees(mesh):
    v1, g1 = K.element_geometry_numpy(mesh.vertices, mesh.simplices)
    v2, g2 = K.element_geometry_numba(mesh.vertices, mesh.simplices)
    np.testing.assert_allclose(v1, v2, rtol=1e-14)
    np.testing.assert_allclose(g1, g2, rtol=1e-12, atol=1e-12)


@needs_numba
def test_local_matrices_agree(mesh):
    rng = np.random.default_rng(3)
    d = mesh.dim
    A = rng.standard_normal((mesh.num_elements, d, d))
    H = rng.standard_normal((mesh.num_elements, d))
    np.testing.assert_allclose(K.local_stiffness_numpy(mesh.volumes, mesh.grads, A),
                               K.local_stiffness_numba(mesh.volumes, mesh.grads, A),
                               rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(K.local_drift_numpy(mesh.volumes, mesh.grads, H),
                               K.local_drift_numba(mesh.volumes, mesh.grads, H),
                               rtol=1e-12, atol=1e-14)


@needs_numba
def test_locate_agrees_including_faces_and_outside(mesh):
    rng = np.random.default_rng(4)
    d = mesh.dim
    pts = np.concatenate([rng.uniform(-1.2, 1.2, size=(2000, d)), mesh.vertices,
                          mesh.barycenters])
    np.testing.assert_array_equal(K.locate_numpy(pts, *_grid(mesh)),
                                  K.locate_numba(pts, *_grid(mesh)))


@needs_numba
def test_convolution_agrees(mesh):
    rng = np.random.default_rng(5)
    vals = rng.standard_normal((mesh.num_elements, mesh.dim))
    offsets, weights = mollifier_stencil(mesh.dim, 4)
    targets = mesh.barycenters[:40]
    a = K.gridded_convolution_numpy(targets, offsets, weights, *_grid(mesh), vals)
    b = K.gridded_convolution_numba(targets, offsets, weights, *_grid(mesh), vals)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_disable_flag_selects_numpy():
    env = dict(os.environ, DRIFTFEM_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "import driftfem; print(driftfem.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_local_stiffness_rows_sum_to_zero(mesh):
    d = mesh.dim
    A = np.broadcast_to(np.eye(d), (mesh.num_elements, d, d))
    Ke = K.local_stiffness(mesh.volumes, mesh.grads, np.ascontiguousarray(A))
    np.testing.assert_allclose(Ke.sum(axis=2), 0.0, atol=1e-12)
