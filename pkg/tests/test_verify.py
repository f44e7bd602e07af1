import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftfem import verify as V
from driftfem.errors import InputError
from driftfem.fields import Constant, ProductSine, ScaledScalar, preset_skew_example
from driftfem.mesh import DomainSpec
from driftfem.pipeline import ProblemSpec, solve_problem

finite = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(sorted(V.CRITERIA)), finite, finite, st.floats(0, 1),
       st.lists(st.tuples(st.floats(1e-3, 1.0), finite), max_size=4),
       st.one_of(st.none(), st.just("failed at n=8")), st.floats(0, 0.5))
def test_pass_flag_is_pure_function_of_fields(criterion, m, b, tol, trend, flag, slack):
    extras = {"positivity_failure": flag, "trend_slack": slack}
    rep = V.make_report("x", m, b, tol, trend, criterion=criterion, extras=extras)
    assert rep.passed == V.recompute_pass(rep)
    hs = [h for h, _ in rep.refinement_trend]
    assert hs == sorted(hs, reverse=True)
    if criterion == "relative":
        assert rep.passed == (m <= b * (1 + tol))


def test_report_roundtrip_dict():
    rep = V.make_report("x", 0.5, 1.0, 0.1, [(0.1, 2.0), (0.2, 3.0)])
    d = rep.to_dict()
    assert d["refinement_trend"] == [[0.2, 3.0], [0.1, 2.0]]
    assert d["passed"] is True


def _wmp_problem(f, A="I", H="zero", n=8):
    return V.standard_problem(2, A, H, n=n, f=f)


def test_wmp_identity_zero_drift_measures_zero():
    rep = V.check_weak_max_principle(_wmp_problem(-1.0))
    assert rep.measured == 0.0 and rep.passed


def test_wmp_sign_symmetry():
    a = V.check_weak_max_principle(_wmp_problem(-1.0, "checkerboard", "skew"), [8, 16])
    b = V.check_weak_max_principle(_wmp_problem(1.0, "checkerboard", "skew"), [8, 16],
                                   flip=True)
    assert a.refinement_trend == b.refinement_trend


def test_wmp_rejects_positive_load():
    with pytest.raises(InputError, match="element"):
        V.check_weak_max_principle(_wmp_problem(1.0))
    with pytest.raises(InputError):
        V.check_weak_max_principle(_wmp_problem(-1.0), flip=True)


def _subsolution_problem(n=16):
    dom = DomainSpec.unit_box(2)
    return ProblemSpec.simple(dom, H2=preset_skew_example(2, [0.5, 0.5])[1], mesh_n=n)


def test_subsolution_trivial_cases():
    p = _subsolution_problem()
    neg = V.check_positive_part_subsolution(p, Constant(-1.0))
    assert neg.measured == 0.0 and neg.passed
    pos = V.check_positive_part_subsolution(p, Constant(1.0), g=Constant(-1.0))
    assert pos.measured == 0.0 and pos.passed
    with pytest.raises(InputError):
        V.check_positive_part_subsolution(p, Constant(1.0), g=Constant(1.0))


def _contraction_problem(f=1.0, H="bump"):
    return V.standard_problem(2, "I", H, n=8, c=2.0, alpha=2.0, f=f)


def test_contraction_zero_drift_below_one():
    p = _contraction_problem(H="zero")
    for t in (1.0, 2.0, math.inf):
        rep = V.check_contraction(p, t)
        assert rep.extras["harnack_ratio"] == pytest.approx(1.0, abs=1e-12)
        assert rep.measured <= 1.0


def test_contraction_invariant_under_load_scaling():
    f = ProductSine(((-1.0, 1.0), (-1.0, 1.0)))
    a = V.check_contraction(_contraction_problem(f), 2.0)
    b = V.check_contraction(_contraction_problem(ScaledScalar(f, 2.0)), 2.0)
    assert b.measured == pytest.approx(a.measured, rel=1e-10)


def test_contraction_rejects_c_below_alpha():
    p = V.standard_problem(2, "I", "zero", n=8, c=1.0, alpha=2.0)
    with pytest.raises(InputError, match="element"):
        V.check_contraction(p, 2.0)
    with pytest.raises(InputError):
        V.check_contraction(V.standard_problem(2, "I", "zero", n=8), 2.0)


def test_energy_estimate_zero_load_and_scaling():
    p0 = V.standard_problem(3, "I", "zero", n=4, f=0.0)
    assert V.check_energy_estimate(p0).measured == 0.0
    f = ProductSine(((-1.0, 1.0),) * 3)
    a = V.check_energy_estimate(V.standard_problem(3, "I", "zero", n=4, f=f))
    b = V.check_energy_estimate(V.standard_problem(3, "I", "zero", n=4,
                                                   f=ScaledScalar(f, 3.0)))
    assert a.measured < 1.0
    assert b.measured == pytest.approx(a.measured, rel=1e-10)
    with pytest.raises(InputError):
        V.check_energy_estimate(V.standard_problem(2, "I", "zero", n=4))


def test_coercivity_and_form_bound():
    p = V.standard_problem(3, "checkerboard", "bump", n=4)
    assert V.check_shifted_coercivity(p, nvec=20).passed
    assert V.check_form_bound(p, nvec=20).passed


def test_coercivity_reproducible_for_seed():
    p = V.standard_problem(3, "I", "skew", n=4)
    a = V.check_shifted_coercivity(p, nvec=10, seed=3)
    b = V.check_shifted_coercivity(p, nvec=10, seed=3)
    assert a.measured == b.measured


def test_mollifier_zero_drift_identical_solutions():
    p = V.standard_problem(2, "I", "zero", n=8)
    rep = V.mollifier_stability_study(p, (2, 4))
    assert all(v == 0.0 for _, v in rep.refinement_trend)
    assert rep.measured == 1.0 and rep.passed


def test_mollifier_smooth_drift_first_order():
    p = V.standard_problem(2, "I", "bump", n=16)
    rep = V.mollifier_stability_study(p, (2, 4, 8))
    diffs = [v for _, v in rep.refinement_trend]
    assert diffs[1] <= diffs[0] / 2 and diffs[2] <= diffs[1] / 2


def test_annulus_resolution_choice():
    assert V.annulus_n(1 / 3, 64) == 66
    assert V.annulus_n(1 / 7, 64) == 70
    assert V.annulus_n(1 / 15, 64) == 60
    assert V.annulus_n(1 / 3, 32) == 30
    with pytest.raises(InputError):
        V.annulus_validation(1.5)


def test_annulus_coarse_anchor():
    rep = V.annulus_validation(1 / 3, 2, n=18)
    assert rep.extras["anchor_exact"] == 2.0
    assert abs(rep.extras["anchor_ratio"] - 2.0) < 0.05


def test_convergence_zero_solution():
    rep = V.convergence_study((4, 8, 16), amplitude=0.0)
    assert rep.measured == 0.0 and rep.passed
    assert rep.extras["errors_L2"] == [0.0, 0.0, 0.0]


def test_blowup_rejects_unknown_variant():
    with pytest.raises(InputError):
        V.blowup_study((4, 8), 2, "sideways")


def test_blowup_puncture_disagreement_2d():
    free = V.blowup_study((8, 16, 32), 2, "unpunctured")
    punct = V.blowup_study((8, 16, 32), 2, "punctured")
    assert free.passed and free.extras["growth_ratios"][0] > 1.15
    assert punct.passed and punct.measured < 0.05


def test_divfree_and_equivalence_checks():
    p = V.standard_problem(2, "checkerboard", "skew", n=8)
    run = solve_problem(p)
    assert V.check_divfree_identity(p, run).passed
    assert V.check_equivalence(p, [8, 16]).passed
