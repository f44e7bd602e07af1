import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftfem.errors import InputError
from driftfem.fields import (
    Bump,
    Constant,
    ConstantVector,
    GradientOf,
    admissible_radius,
    form_bound_K,
    lp_norm,
    poincare_constant,
    preset_counterexample,
    select_shift,
    shift_threshold,
    sobolev_constant,
    tail_phi,
    weak_divergence_residual,
)
from driftfem.fields.constants import ElementScalar
from driftfem.mesh import DomainSpec, build_mesh


@pytest.fixture(scope="module")
def cube():
    return build_mesh(DomainSpec.symmetric(3, 1.0, 0.5), 4)


def test_constant_values_exact():
    assert sobolev_constant(3) == 4.0
    assert sobolev_constant(4) == 3.0
    assert abs(poincare_constant(3, 1.0) - 4.0 / 3.0) <= 1e-15 * 4.0 / 3.0
    assert form_bound_K(3, 1.0, 1.0) == 7.0
    assert shift_threshold(3, 1.0) == 1.0 / 64.0
    assert math.isclose(shift_threshold(4, 2.0), 4.0 / 16.0 * (2.0 / 3.0) ** 2, rel_tol=1e-15)


@pytest.mark.parametrize("fn,args", [
    (sobolev_constant, (2,)), (poincare_constant, (2, 1.0)), (form_bound_K, (2, 1.0, 1.0)),
    (shift_threshold, (2, 1.0)), (poincare_constant, (3, 0.0)), (form_bound_K, (3, 0.0, 1.0)),
    (form_bound_K, (3, 1.0, -1.0)),
])
def test_constants_reject_invalid(fn, args):
    with pytest.raises(InputError):
        fn(*args)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 8), st.floats(0.1, 10.0), st.floats(0.0, 10.0))
def test_form_bound_monotone_in_M_and_norm(d, M, h):
    assert form_bound_K(d, 2 * M, h) > form_bound_K(d, M, h)
    assert form_bound_K(d, M, h + 1.0) > form_bound_K(d, M, h)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_tail_phi_nonincreasing(cube_s1, cube_s2):
    mesh = build_mesh(DomainSpec.symmetric(3, 1.0, 0.5), 4)
    H = preset_counterexample(3)[1]
    a, b = sorted((cube_s1, cube_s2))
    assert tail_phi(H, mesh, b) <= tail_phi(H, mesh, a) + 1e-15


def test_tail_phi_strict_indicator(cube):
    H = ConstantVector(np.array([2.0, 0.0, 0.0]))
    assert tail_phi(H, cube, 2.0) == 0.0
    vol = 8.0 - 1.0
    assert math.isclose(tail_phi(H, cube, 1.999), (8.0 * vol) ** (2 / 3), rel_tol=1e-13)
    with pytest.raises(InputError):
        tail_phi(H, cube, -1.0)


def test_select_shift_zero_and_constant(cube):
    zero = select_shift(ConstantVector(np.zeros(3)), cube, 1.0)
    assert zero.N == 0.0 and zero.gamma == 0.0
    s = select_shift(ConstantVector(np.array([3.0, 0.0, 0.0])), cube, 2.0)
    assert s.N == 3.0 and s.gamma == 4.5


def test_select_shift_is_minimal(cube):
    H = preset_counterexample(3)[1]
    shift = select_shift(H, cube, 1.0, rule="barycenter")
    thr = shift_threshold(3, 1.0)
    assert tail_phi(H, cube, shift.N, "barycenter") <= thr
    below = np.nextafter(shift.N, 0.0)
    assert shift.N == 0.0 or tail_phi(H, cube, below, "barycenter") > thr
    assert math.isclose(shift.gamma, shift.N ** 2, rel_tol=1e-15)


def test_select_shift_rejects_dimension_mismatch(cube):
    with pytest.raises(InputError):
        select_shift(ConstantVector(np.zeros(3)), cube, 1.0, d=4)
    with pytest.raises(InputError):
        select_shift(ConstantVector(np.zeros(3)), cube, 0.0)


def test_admissible_radius(cube):
    small = admissible_radius(ConstantVector(np.zeros(3)), cube, [0.75, 0.75, 0.75], 1.0)
    assert small.satisfied
    big = admissible_radius(ConstantVector(np.array([1e3, 0, 0])), cube, [0.75, 0.75, 0.75], 1.0)
    assert not big.satisfied and big.radius == cube.h
    with pytest.raises(InputError):
        admissible_radius(ConstantVector(np.zeros(3)), cube, [0.0, 0.0, 0.0], 1.0)


class _Laplacian(Constant):
    def __init__(self, V):
        super().__init__(0.0)
        self.V = V

    def __call__(self, x):
        return self.V.laplacian(x)


def test_weak_divergence_residual():
    V = Bump(np.full(3, 0.5), 0.45, 1.0)
    # grad V has divergence lap V; what remains is quadrature error, shrinking fast
    res = []
    for n in (8, 16):
        mesh = build_mesh(DomainSpec.unit_box(3), n)
        r, l2 = weak_divergence_residual(GradientOf(V), _Laplacian(V), mesh)
        res.append(r)
    wrong, _ = weak_divergence_residual(GradientOf(V), Constant(0.0), mesh)
    assert res[1] < res[0] / 10.0
    assert res[1] < wrong / 10.0 and l2 > 0


def test_element_scalar_lp_norm(cube):
    vals = np.full(cube.num_elements, 2.0)
    assert math.isclose(lp_norm(ElementScalar(cube, vals), cube, 2), 2.0 * math.sqrt(7.0),
                        rel_tol=1e-13)
