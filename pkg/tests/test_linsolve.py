import numpy as np
import pytest
import scipy.sparse as sp

from driftfem.assembly import apply_dirichlet, assemble_drift_on_trial, assemble_stiffness
from driftfem.errors import InputError, SingularMatrixError, SolverError
from driftfem.fields import IdentityMatrix
from driftfem.linsolve import DIRECT_LIMIT, SolveOptions, relative_residual, solve
from driftfem.mesh import DomainSpec, build_mesh


@pytest.fixture(scope="module")
def system():
    m = build_mesh(DomainSpec.unit_box(2), 16)
    H = np.tile([5.0, -3.0], (m.num_elements, 1))
    K = assemble_stiffness(m, IdentityMatrix(2)) + assemble_drift_on_trial(m, H)
    s = apply_dirichlet(K, np.ones(m.num_vertices), m)
    return s.matrix, s.rhs


def test_direct(system):
    A, b = system
    x, stats = solve(A, b, SolveOptions(method="direct"))
    assert stats.method_used == "direct"
    assert stats.final_residual <= 1e-10
    assert relative_residual(A, x, b) == stats.final_residual


@pytest.mark.parametrize("pre", ["none", "diagonal", "shifted"])
def test_krylov_meets_tolerance(system, pre):
    A, b = system
    opts = SolveOptions(method="krylov", rel_tol=1e-10, precondition=pre, gamma=1.0)
    x, stats = solve(A, b, opts)
    assert stats.method_used == "krylov"
    assert stats.final_residual <= 1e-10
    xd, _ = solve(A, b, SolveOptions(method="direct"))
    np.testing.assert_allclose(x, xd, rtol=1e-7, atol=1e-12)


def test_krylov_scale_invariant(system):
    A, b = system
    x1, _ = solve(A, b, SolveOptions(method="krylov"))
    x2, s2 = solve(A, 1e-20 * b, SolveOptions(method="krylov"))
    assert s2.final_residual <= 1e-11
    np.testing.assert_allclose(x2, 1e-20 * x1, rtol=1e-8)


def test_auto_picks_direct_for_small(system):
    A, b = system
    assert A.shape[0] < DIRECT_LIMIT
    assert solve(A, b)[1].method_used == "direct"


def test_zero_rhs_and_singular():
    A = sp.identity(4, format="csr")
    x, stats = solve(A, np.zeros(4))
    assert np.all(x == 0) and stats.iterations == 0
    S = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SingularMatrixError):
        solve(S, np.zeros(2))
    with pytest.raises(SingularMatrixError):
        solve(S, np.ones(2), SolveOptions(method="direct"))


def test_stagnation_raises_with_best_iterate(system):
    A, b = system
    with pytest.raises(SolverError) as exc:
        solve(A, b, SolveOptions(method="krylov", max_iter=2, rel_tol=1e-14,
                                 precondition="none"))
    assert exc.value.x is not None and exc.value.x.shape == b.shape
    assert exc.value.residual > 1e-14


@pytest.mark.parametrize("kw", [{"method": "cg"}, {"rel_tol": 0.0}, {"max_iter": 0},
                                {"precondition": "ilu"}, {"gamma": -1.0}])
def test_invalid_options(kw):
    with pytest.raises(InputError):
        SolveOptions(**kw)


def test_shape_mismatch():
    with pytest.raises(InputError):
        solve(sp.identity(3), np.ones(2))
