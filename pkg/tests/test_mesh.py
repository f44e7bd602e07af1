import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftfem.errors import InputError, MeshError
from driftfem.mesh import (
    CONTAINER_ONLY,
    INNER,
    DomainSpec,
    build_mesh,
    container_mesh,
    inner_element_map,
    inner_vertex_map,
    refine_uniform,
    restrict_to_inner,
)


def test_unit_square_n2_counts():
    m = build_mesh(DomainSpec.unit_box(2), 2)
    assert m.num_vertices == 9
    assert m.num_elements == 8
    assert len(m.boundary_vertices) == 8
    assert m.interior_vertices.tolist() == [4]
    assert math.isclose(m.total_volume, 1.0, rel_tol=1e-14)


def test_unit_cube_n1_is_six_tetrahedra():
    m = build_mesh(DomainSpec.unit_box(3), 1)
    assert m.num_vertices == 8
    assert m.num_elements == 6
    np.testing.assert_allclose(m.volumes, 1.0 / 6.0, rtol=1e-14)


@pytest.mark.parametrize("dim,n", [(2, 4), (3, 3)])
def test_orientation_positive_and_volume_sum(dim, n):
    m = build_mesh(DomainSpec.symmetric(dim, 1.0), n)
    assert np.all(m.volumes > 0)
    assert math.isclose(m.total_volume, 2.0 ** dim, rel_tol=1e-13)
    assert m.num_elements == math.factorial(dim) * n ** dim


def test_hole_removes_cells_and_marks_faces_boundary():
    dom = DomainSpec.symmetric(2, 1.0, 0.5)
    m = build_mesh(dom, 4)
    assert math.isclose(m.total_volume, 4.0 - 1.0, rel_tol=1e-13)
    hole_face = m.vertex_at([0.5, 0.0])
    assert m.is_boundary[hole_face]
    assert not np.any(np.all(np.abs(m.barycenters) < 0.5, axis=1))


def test_hole_with_no_interior_vertices():
    dom = DomainSpec.unit_box(2, hole=((1 / 3, 2 / 3), (1 / 3, 2 / 3)))
    m = build_mesh(dom, 3)
    assert len(m.interior_vertices) == 0


def test_misaligned_hole_names_axis():
    dom = DomainSpec.unit_box(2, hole=((0.25, 0.75), (0.3, 0.7)))
    with pytest.raises(MeshError) as exc:
        build_mesh(dom, 4)
    assert exc.value.axis == 1
    assert "axis 1" in str(exc.value)


def test_too_small_with_hole_and_bad_n():
    with pytest.raises(InputError):
        build_mesh(DomainSpec.symmetric(2, 1.0, 0.5), 2)
    with pytest.raises(InputError):
        build_mesh(DomainSpec.unit_box(2), 0)


def test_invalid_domain_specs():
    with pytest.raises(InputError):
        DomainSpec(1, ((0.0, 1.0),))
    with pytest.raises(InputError):
        DomainSpec(2, ((0.0, 1.0), (1.0, 0.0)))
    with pytest.raises(InputError):
        DomainSpec.unit_box(2, hole=((0.0, 0.5), (0.25, 0.75)))


def test_container_padding_and_maps():
    dom = DomainSpec.unit_box(2)
    cont, vmap = container_mesh(dom, 4)
    np.testing.assert_array_equal(cont.vertices.min(axis=0), [-0.25, -0.25])
    np.testing.assert_array_equal(cont.vertices.max(axis=0), [1.25, 1.25])
    inner = build_mesh(dom, 4)
    np.testing.assert_array_equal(cont.vertices[vmap], inner.vertices)
    emap = inner_element_map(inner, cont)
    np.testing.assert_array_equal(cont.barycenters[emap], inner.barycenters)
    assert np.all(cont.element_region[emap] == INNER)
    assert np.sum(cont.element_region == CONTAINER_ONLY) == cont.num_elements - inner.num_elements
    np.testing.assert_array_equal(inner_vertex_map(inner, cont), vmap)
    np.testing.assert_array_equal(restrict_to_inner(np.arange(cont.num_vertices), vmap), vmap)


def test_container_rejects_zero_padding_and_fractional_cells():
    with pytest.raises(InputError):
        container_mesh(DomainSpec.unit_box(2, container_padding=0.0), 4)
    with pytest.raises(InputError):
        container_mesh(DomainSpec.unit_box(2), 3)


def test_refine_uniform_halves_h():
    m = build_mesh(DomainSpec.unit_box(2), 4)
    r = refine_uniform(m)
    assert r.n == 8
    assert math.isclose(r.h, m.h / 2, rel_tol=1e-14)
    np.testing.assert_array_equal(r.vertices[r.vertex_at(m.vertices[7])], m.vertices[7])


def test_p1_gradient_exact_for_linear():
    m = build_mesh(DomainSpec.symmetric(3, 1.0), 3)
    g = np.array([0.3, -1.2, 2.0])
    u = m.vertices @ g + 0.7
    np.testing.assert_allclose(m.p1_gradient(u), np.broadcast_to(g, (m.num_elements, 3)),
                               atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 3), st.integers(1, 5), st.integers(0, 10_000))
def test_locate_returns_containing_element(dim, n, seed):
    m = build_mesh(DomainSpec.unit_box(dim), n)
    pts = np.random.default_rng(seed).uniform(0.0, 1.0, size=(50, dim))
    el = m.locate(pts)
    assert np.all(el >= 0)
    lam0 = pts - m.vertices[m.simplices[el, 0]]
    lam = np.einsum("eka,ea->ek", m.grads[el], lam0)
    lam[:, 0] += 1.0
    assert np.all(lam > -1e-10)


def test_locate_outside_and_in_hole():
    m = build_mesh(DomainSpec.symmetric(2, 1.0, 0.5), 4)
    el = m.locate(np.array([[1.5, 0.0], [0.0, 0.0], [0.75, 0.75]]))
    assert el[0] == -1 and el[1] == -1 and el[2] >= 0


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3), st.integers(1, 4))
def test_kuhn_mesh_conforming(dim, n):
    # every interior facet is shared by exactly two elements
    m = build_mesh(DomainSpec.unit_box(dim), n)
    faces = {}
    for s in m.simplices:
        for k in range(dim + 1):
            f = tuple(sorted(np.delete(s, k)))
            faces[f] = faces.get(f, 0) + 1
    assert set(faces.values()) <= {1, 2}
    bnd = [f for f, c in faces.items() if c == 1]
    assert all(m.is_boundary[list(f)].all() for f in bnd)
