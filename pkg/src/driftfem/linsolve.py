"""Sparse linear solves: LU with one refinement step, or restarted BiCGStab."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InputError, SingularMatrixError, SolverError

DIRECT_LIMIT = 20_000
DIRECT_TOL = 1e-10


@dataclass(frozen=True)
class SolveOptions:
    """Solver configuration.

    ``method`` is ``direct``, ``krylov`` or ``auto`` (direct below
    ``DIRECT_LIMIT`` unknowns). ``precondition`` is ``none``, ``diagonal``
    or ``shifted``; the shifted preconditioner factors ``A + gamma * M``.
    """

    method: str = "auto"
    rel_tol: float = 1e-11
    max_iter: int = 20000
    precondition: str = "diagonal"
    gamma: float = 0.0

    def __post_init__(self):
        if self.method not in ("auto", "direct", "krylov"):
            raise InputError(f"unknown solve method {self.method!r}")
        if not 0.0 < self.rel_tol < 1.0:
            raise InputError("rel_tol must lie in (0, 1)")
        if int(self.max_iter) < 1:
            raise InputError("max_iter must be >= 1")
        if self.precondition not in ("none", "diagonal", "shifted"):
            raise InputError(f"unknown preconditioner {self.precondition!r}")
        if not self.gamma >= 0:
            raise InputError("gamma must be >= 0")

    def to_dict(self):
        return {"method": self.method, "rel_tol": self.rel_tol, "max_iter": self.max_iter,
                "precondition": self.precondition, "gamma": self.gamma}


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    final_residual: float
    method_used: str

    def to_dict(self):
        return {"iterations": self.iterations, "final_residual": self.final_residual,
                "method_used": self.method_used}


def relative_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return float(r / nb) if nb > 0 else float(r)


def _factor(A):
    try:
        with np.errstate(all="ignore"):
            lu = spla.splu(sp.csc_matrix(A))
    except RuntimeError as exc:
        raise SingularMatrixError(f"sparse LU failed: {exc}") from exc
    diag = np.abs(lu.U.diagonal())
    if diag.size and (not np.all(np.isfinite(diag)) or diag.min() == 0.0):
        raise SingularMatrixError("sparse LU produced a zero pivot")
    return lu


def _direct(A, b):
    lu = _factor(A)
    x = lu.solve(b)
    x = x + lu.solve(b - A @ x)
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("direct solve produced non-finite values")
    res = relative_residual(A, x, b)
    if res > DIRECT_TOL:
        raise SolverError(f"direct solve residual {res:.3e} exceeds {DIRECT_TOL:g}",
                          x=x, residual=res)
    return x, SolveStats(1, res, "direct")


def _preconditioner(A, opts, mass):
    if opts.precondition == "none":
        return None
    if opts.precondition == "diagonal":
        d = A.diagonal()
        if np.any(d == 0):
            raise SingularMatrixError("diagonal preconditioner has a zero diagonal entry")
        inv = 1.0 / d
        return spla.LinearOperator(A.shape, matvec=lambda v: inv * v, dtype=float)
    M = sp.identity(A.shape[0], format="csr") if mass is None else mass
    lu = _factor(A + opts.gamma * M)
    return spla.LinearOperator(A.shape, matvec=lu.solve, dtype=float)


def _krylov(A, b, opts, mass, x0=None):
    # scipy's breakdown test is absolute; solve with a unit-norm rhs
    scale = float(np.linalg.norm(b))
    try:
        x, stats = _krylov_unit(A, b / scale, opts, mass, None if x0 is None else x0 / scale)
    except SolverError as exc:
        raise SolverError(str(exc), x=scale * exc.x, residual=exc.residual) from None
    return scale * x, stats


def _krylov_unit(A, b, opts, mass, x0=None):
    P = _preconditioner(A, opts, mass)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    best_x, best_res = x.copy(), relative_residual(A, x, b)
    iters = 0
    count = [0]

    def cb(_):
        count[0] += 1

    stall = 0
    while iters < opts.max_iter:
        count[0] = 0
        # ask for a margin below the target; the recomputed residual decides
        x, info = spla.bicgstab(A, b, x0=x, rtol=0.5 * opts.rel_tol, atol=0.0,
                                maxiter=opts.max_iter - iters, M=P, callback=cb)
        iters += max(count[0], 1)
        if not np.all(np.isfinite(x)):
            x = best_x.copy()
            stall += 1
        res = relative_residual(A, x, b)
        if res < best_res:
            if res > 0.9 * best_res:
                stall += 1
            best_x, best_res = x.copy(), res
        else:
            stall += 1
            x = best_x.copy()
        if best_res <= opts.rel_tol:
            return best_x, SolveStats(iters, best_res, "krylov")
        if stall >= 5:
            break
    raise SolverError(
        f"BiCGStab stopped after {iters} iterations at relative residual {best_res:.3e} "
        f"(target {opts.rel_tol:g})", x=best_x, residual=best_res)


def solve(matrix, rhs, opts: Optional[SolveOptions] = None, mass=None):
    """Solve ``matrix @ x = rhs``.

    Returns ``(x, SolveStats)``; ``final_residual`` is recomputed from ``x``.
    """
    opts = SolveOptions() if opts is None else opts
    A = sp.csr_matrix(matrix)
    b = np.asarray(rhs, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise InputError(f"matrix shape {A.shape} incompatible with rhs length {b.shape[0]}")
    if b.shape[0] == 0:
        return b.copy(), SolveStats(0, 0.0, "direct")
    method = opts.method
    if method == "auto":
        method = "direct" if A.shape[0] < DIRECT_LIMIT else "krylov"
    if not np.any(b):
        if method == "direct":
            _factor(A)  # still report singular systems
        return np.zeros_like(b), SolveStats(0, 0.0, method)
    if method == "direct":
        return _direct(A, b)
    return _krylov(A, b, opts, mass)
