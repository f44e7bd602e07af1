import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftfem.errors import InputError, PositivityFailure
from driftfem.fields import (
    Checkerboard,
    Constant,
    ConstantVector,
    ProductSine,
    preset_counterexample,
    preset_skew_example,
)
from driftfem.mesh import DomainSpec
from driftfem.pipeline import (
    ProblemSpec,
    construct_rho,
    divfree_transform,
    harnack_ratio,
    solve_problem,
    solve_untransformed,
)
from driftfem.verify import standard_bump

CONSTANT_KEYS = {"S_d", "poincare", "K", "N", "gamma", "harnack_ratio", "derived_K5",
                 "energy_ratio", "linf_ratio", "contraction_ratios", "c_class", "reasons"}


def test_zero_drift_weight_is_one():
    p = ProblemSpec.simple(DomainSpec.unit_box(2), mesh_n=8)
    w = construct_rho(p)
    np.testing.assert_allclose(w.rho, 1.0, atol=1e-12)
    assert w.harnack_ratio == pytest.approx(1.0, abs=1e-12)
    assert w.rho[w.x1_index] == 1.0
    np.testing.assert_array_equal(w.x1, [0.5, 0.5])


@pytest.mark.parametrize("dim", [2, 3])
def test_skew_weight_is_one(dim):
    p = ProblemSpec.simple(DomainSpec.symmetric(dim, 1.0), H2=preset_skew_example(dim)[1],
                           mesh_n=8 if dim == 2 else 4)
    w = construct_rho(p)
    assert np.max(np.abs(w.rho - 1.0)) < 1e-8


def test_gradient_bump_weight_matches_exp_minus_v():
    V, H = standard_bump(2)
    p = ProblemSpec.simple(DomainSpec.unit_box(2), H1=H, mesh_n=16)
    w = construct_rho(p)
    inner = w.disc.inner
    exact = np.exp(-V(inner.vertices)) / np.exp(-V(w.x1[None]))[0]
    assert np.max(np.abs(w.rho_inner - exact)) < 0.02


def test_custom_x1_and_invalid_x1():
    p = ProblemSpec.simple(DomainSpec.unit_box(2), H1=standard_bump(2)[1], mesh_n=8,
                           x1=[0.25, 0.75])
    w = construct_rho(p)
    np.testing.assert_array_equal(w.x1, [0.25, 0.75])
    assert w.rho[w.x1_index] == 1.0
    with pytest.raises(InputError):
        construct_rho(ProblemSpec.simple(DomainSpec.unit_box(2), mesh_n=8, x1=[0.3, 0.3]))


def test_positivity_failure_reports_vertex():
    dom = DomainSpec.symmetric(2, 1.0, 0.25)
    p = ProblemSpec.simple(dom, mesh_n=8, hole_values=Constant(-1.0))
    with pytest.raises(PositivityFailure) as exc:
        construct_rho(p)
    assert exc.value.node is not None and exc.value.value <= 0


def test_harnack_ratio_helper():
    assert harnack_ratio(np.array([1.0, 2.0, 4.0, 8.0]), [1, 2]) == 2.0


@pytest.mark.parametrize("A", ["I", "checkerboard"])
@pytest.mark.parametrize("drift", ["zero", "bump", "skew"])
def test_divfree_residual_small(A, drift):
    d = 2
    Af = None if A == "I" else Checkerboard(np.eye(d), 10 * np.eye(d), 0.5)
    kw = {"zero": {}, "bump": {"H1": standard_bump(d, np.full(d, 0.2))[1]},
          "skew": {"H2": preset_skew_example(d)[1]}}[drift]
    p = ProblemSpec.simple(DomainSpec.symmetric(d, 1.0), A=Af, mesh_n=8, **kw)
    t = divfree_transform(p, construct_rho(p))
    assert t.divfree_residual <= 10 * p.solver.rel_tol
    assert np.all(t.rho_bar > 0)


def test_transformed_and_untransformed_agree_under_refinement():
    H = standard_bump(2)[1]
    diffs = []
    for n in (8, 16, 32):
        p = ProblemSpec.simple(DomainSpec.unit_box(2), H1=H, mesh_n=n)
        sol = solve_problem(p)[0]
        ref = solve_untransformed(p, sol.mesh)
        diffs.append(np.max(np.abs(sol.u - ref.u)) / np.max(np.abs(ref.u)))
    assert diffs[2] < diffs[1] < diffs[0] < 0.05


def test_zero_drift_transformed_equals_untransformed():
    p = ProblemSpec.simple(DomainSpec.unit_box(2), mesh_n=8, c=1.0)
    sol = solve_problem(p)[0]
    np.testing.assert_allclose(sol.u, solve_untransformed(p).u, atol=1e-13)


def test_constants_report_2d_nulls_with_reasons():
    p = ProblemSpec.simple(DomainSpec.unit_box(2), mesh_n=8)
    rep = solve_problem(p)[3].to_dict()
    assert set(rep) == CONSTANT_KEYS
    for key in ("S_d", "poincare", "K", "N", "gamma", "derived_K5"):
        assert rep[key] is None and "d >= 3" in rep["reasons"][key]
    assert rep["contraction_ratios"]["L2"] is None
    assert rep["reasons"]["contraction_L2"] == "alpha = 0"


def test_constants_report_3d_values():
    p = ProblemSpec.simple(DomainSpec.unit_box(3), mesh_n=4, c=2.0, alpha=2.0)
    rep = solve_problem(p)[3]
    assert rep.S_d == 4.0
    assert rep.poincare == pytest.approx(4.0 / 3.0, rel=1e-15)
    assert rep.K == 3.0 and rep.N == 0.0 and rep.gamma == 0.0
    assert rep.derived_K5 == pytest.approx(4.0, rel=1e-12)
    assert set(rep.contraction_ratios) == {"L1", "L2", "Linf"}
    assert all(0 < v <= 1.0 for v in rep.contraction_ratios.values())


def test_solution_norm_keys():
    p = ProblemSpec.simple(DomainSpec.unit_box(3), mesh_n=4, thetas=(1.5, math.inf))
    norms = solve_problem(p)[0].norms
    assert {"H1_0", "L2", "Linf", "L2d/(d+2)", "L1.5"} <= set(norms)


def test_problem_spec_validation():
    dom = DomainSpec.unit_box(2)
    with pytest.raises(InputError):
        ProblemSpec.simple(dom, alpha=-1.0)
    with pytest.raises(InputError):
        ProblemSpec.simple(dom, c_class="L3")
    with pytest.raises(InputError):
        ProblemSpec.simple(dom, positivity_floor=0.0)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 10.0))
def test_solution_linear_in_load(t):
    dom = DomainSpec.unit_box(2)
    H = ConstantVector(np.array([1.0, -0.5]))
    base = ProblemSpec.simple(dom, H1=H, f=ProductSine(dom.inner_box), mesh_n=8)
    scaled = ProblemSpec.simple(dom, H1=H, f=ProductSine(dom.inner_box, t), mesh_n=8)
    np.testing.assert_allclose(solve_problem(scaled)[0].u, t * solve_problem(base)[0].u,
                               rtol=1e-9, atol=1e-14)


def test_counterexample_punctured_weight_is_bounded():
    w_exact, H, _ = preset_counterexample(2)
    p = ProblemSpec.simple(DomainSpec.symmetric(2, 1.0, 0.25), H1=H, mesh_n=16,
                           x1=[0.5, 0.5], hole_values=w_exact)
    w = construct_rho(p)
    assert 1.0 < w.harnack_ratio < 3.0
