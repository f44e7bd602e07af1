import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from driftfem.assembly import (
    apply_dirichlet,
    assemble_drift_on_test,
    assemble_drift_on_trial,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
)
from driftfem.errors import InputError, NegativeCoefficientWarning, NonFiniteFieldError
from driftfem.fields import Constant, ConstantMatrix, ConstantVector, IdentityMatrix
from driftfem.mesh import DomainSpec, build_mesh


@pytest.fixture(params=[2, 3], ids=["2d", "3d"])
def mesh(request):
    d = request.param
    return build_mesh(DomainSpec.symmetric(d, 1.0, 0.5), 8)


def test_five_point_stencil_on_unit_square():
    m = build_mesh(DomainSpec.unit_box(2), 2)
    K = assemble_stiffness(m, IdentityMatrix(2)).toarray()
    c = 4
    assert K[c, c] == pytest.approx(4.0, rel=1e-14)
    nbrs = [m.vertex_at(p) for p in ([0.5, 0.0], [0.5, 1.0], [0.0, 0.5], [1.0, 0.5])]
    np.testing.assert_allclose(K[c, nbrs], -1.0, rtol=1e-14)
    diag = [m.vertex_at(p) for p in ([0.0, 0.0], [1.0, 1.0])]
    np.testing.assert_allclose(K[c, diag], 0.0, atol=1e-15)


def test_stiffness_is_m_matrix_for_identity(mesh):
    K = assemble_stiffness(mesh, IdentityMatrix(mesh.dim)).toarray()
    off = K - np.diag(np.diag(K))
    assert np.all(off <= 1e-14)
    np.testing.assert_allclose(K, K.T, atol=1e-14)
    np.testing.assert_allclose(K.sum(axis=1), 0.0, atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3), st.lists(st.floats(-2, 2), min_size=9, max_size=9),
       st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_stiffness_annihilates_linears_on_interior_rows(dim, entries, g):
    m = build_mesh(DomainSpec.unit_box(dim), 3)
    B = np.array(entries[: dim * dim]).reshape(dim, dim)
    A = B @ B.T + np.eye(dim)
    K = assemble_stiffness(m, A)
    u = m.vertices @ np.array(g[:dim])
    r = (K @ u)[m.interior_vertices]
    assert np.max(np.abs(r)) <= 1e-11 * (1 + np.abs(A).max() * np.abs(g).max())


def test_stiffness_energy_of_linear_function(mesh):
    g = np.arange(1.0, mesh.dim + 1)
    u = mesh.vertices @ g
    K = assemble_stiffness(mesh, IdentityMatrix(mesh.dim))
    assert math.isclose(u @ (K @ u), g @ g * mesh.total_volume, rel_tol=1e-12)


def test_scaled_stiffness(mesh):
    K1 = assemble_stiffness(mesh, IdentityMatrix(mesh.dim))
    K2 = assemble_stiffness(mesh, IdentityMatrix(mesh.dim), scale=2.5)
    np.testing.assert_allclose(K2.toarray(), 2.5 * K1.toarray(), rtol=1e-14)


def test_drift_forms_are_transposes(mesh):
    H = np.random.default_rng(0).standard_normal((mesh.num_elements, mesh.dim))
    Dt = assemble_drift_on_test(mesh, H)
    Dr = assemble_drift_on_trial(mesh, H)
    np.testing.assert_allclose(Dt.T.toarray(), Dr.toarray(), atol=1e-15)


def test_drift_on_trial_of_linear_is_lumped_mass(mesh):
    H = np.array([0.7, -1.1, 0.4][: mesh.dim])
    g = np.array([2.0, 0.5, -1.0][: mesh.dim])
    D = assemble_drift_on_trial(mesh, ConstantVector(H))
    M = assemble_mass(mesh, 1.0)
    np.testing.assert_allclose(D @ (mesh.vertices @ g), (H @ g) * M.diagonal(), atol=1e-13)


def test_constant_drift_on_test_rows_vanish_inside(mesh):
    D = assemble_drift_on_test(mesh, ConstantVector(np.ones(mesh.dim)))
    rows = np.asarray(D.sum(axis=1)).ravel()[mesh.interior_vertices]
    assert np.max(np.abs(rows)) < 1e-14


def test_mass_and_load(mesh):
    M = assemble_mass(mesh, 2.0)
    assert math.isclose(M.diagonal().sum(), 2.0 * mesh.total_volume, rel_tol=1e-13)
    np.testing.assert_array_equal(M.toarray(), assemble_mass(mesh, 2.0, lumped=False).toarray())
    b = assemble_load(mesh, Constant(3.0))
    assert math.isclose(b.sum(), 3.0 * mesh.total_volume, rel_tol=1e-13)
    w = np.full(mesh.num_vertices, 2.0)
    np.testing.assert_allclose(assemble_load(mesh, 3.0, weight=w), 2.0 * b, rtol=1e-14)
    with pytest.raises(InputError):
        assemble_load(mesh, 1.0, weight=np.ones(3))


def test_negative_mass_warns(mesh):
    with pytest.warns(NegativeCoefficientWarning):
        assemble_mass(mesh, -1.0)


def test_nonfinite_coefficient_names_element(mesh):
    vals = np.ones(mesh.num_elements)
    vals[5] = np.nan
    with pytest.raises(NonFiniteFieldError, match="element 5"):
        assemble_mass(mesh, vals)


def test_dirichlet_lifting_reproduces_linear(mesh):
    g = np.array([1.0, -2.0, 0.5][: mesh.dim])
    B = np.diag(np.arange(1.0, mesh.dim + 1))
    B[0, -1] = 0.3
    K = assemble_stiffness(mesh, ConstantMatrix(B @ B.T))
    lin = mesh.vertices @ g + 1.0
    sys = apply_dirichlet(K, np.zeros(mesh.num_vertices), mesh, lin)
    x = spla.spsolve(sys.matrix.tocsc(), sys.rhs)
    np.testing.assert_allclose(sys.expand(x), lin, atol=1e-12)
    assert len(sys.fixed_values) == len(mesh.boundary_vertices)


def test_dirichlet_rejects_shape_mismatch(mesh):
    K = assemble_stiffness(mesh, IdentityMatrix(mesh.dim))
    with pytest.raises(InputError):
        apply_dirichlet(K, np.zeros(3), mesh)
