"""P1 finite elements for divergence-form Dirichlet problems with critical drifts.

The solver builds a positive weight from the adjoint problem, rewrites the
drift so that its weighted flux is divergence-free, and solves the
transformed system. ``verify`` holds the numerical checks and studies,
``cli`` the batch front end.
"""
from ._kernels import BACKEND
from .errors import (
    DriftFEMError,
    InputError,
    MeshError,
    NegativeCoefficientWarning,
    NonFiniteFieldError,
    NumericalError,
    PositivityFailure,
    SingularMatrixError,
    SolverError,
)
from .linsolve import SolveOptions, SolveStats, solve
from .mesh import DomainSpec, Mesh, build_mesh, container_mesh
from .pipeline import (
    ConstantsReport,
    ProblemSpec,
    Solution,
    TransformResult,
    WeightResult,
    construct_rho,
    divfree_transform,
    solve_problem,
    solve_transformed,
    solve_untransformed,
)
from .verify import CheckReport, recompute_pass

__version__ = "0.1.0"
