"""Coefficient fields: scalar, vector and matrix presets.

Every field is callable on points of shape (..., d). ``element_values``
returns the per-element sample used by assembly (barycenter unless a field
defines a better-suited element average).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import InputError, NonFiniteFieldError

LN2 = math.log(2.0)


def _check_finite(values, points, what, element_ids=None):
    vals = np.asarray(values)
    bad = ~np.isfinite(vals)
    if vals.ndim > points.ndim - 1:
        bad = bad.reshape(bad.shape[: points.ndim - 1] + (-1,)).any(axis=-1)
    if np.any(bad):
        idx = np.unravel_index(int(np.flatnonzero(bad.ravel())[0]), bad.shape)
        pt = points[idx]
        elem = None
        if element_ids is not None:
            elem = int(np.asarray(element_ids)[idx[0]])
        where = f" in element {elem}" if elem is not None else ""
        raise NonFiniteFieldError(
            f"{what} is not finite at point {np.asarray(pt).tolist()}{where}",
            point=np.asarray(pt), element=elem)
    return vals


class Field:
    """Common interface."""

    kind = "field"
    shape: tuple = ()

    def __call__(self, x):
        raise NotImplementedError

    def sample(self, mesh, lam):
        """Values at barycentric points ``lam`` (nq, d+1) of every element."""
        pts = np.einsum("qi,eia->eqa", lam, mesh.vertices[mesh.simplices])
        vals = self(pts)
        return _check_finite(vals, pts, self.describe(), np.arange(mesh.num_elements))

    def element_values(self, mesh):
        pts = mesh.barycenters
        return _check_finite(self(pts), pts, self.describe(), np.arange(mesh.num_elements))

    def describe(self):
        return self.kind

    def to_dict(self):
        return {"kind": self.kind}


# --------------------------------------------------------------------------
# scalar fields
# --------------------------------------------------------------------------

class ScalarField(Field):
    shape = ()

    def gradient(self, x):
        raise NotImplementedError(f"{self.kind} has no analytic gradient")

    def nodal(self, mesh):
        return _check_finite(self(mesh.vertices), mesh.vertices, self.describe())

    def __mul__(self, other):
        return ScaledScalar(self, float(other))

    __rmul__ = __mul__


@dataclass(eq=False)
class Constant(ScalarField):
    value: float
    kind = "constant"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], float(self.value))

    def gradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(eq=False)
class ScaledScalar(ScalarField):
    base: ScalarField
    factor: float
    kind = "scaled"

    def __call__(self, x):
        return self.factor * self.base(x)

    def gradient(self, x):
        return self.factor * self.base.gradient(x)

    def to_dict(self):
        return {"kind": self.kind, "factor": self.factor, "base": self.base.to_dict()}


@dataclass(eq=False)
class Bump(ScalarField):
    """``amplitude * exp(1 - 1/(1 - s^2))`` for ``s = |x - center| / radius < 1``."""

    center: np.ndarray
    radius: float
    amplitude: float
    kind = "bump"

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if not self.radius > 0:
            raise InputError("bump radius must be positive")

    def _s(self, x):
        z = np.asarray(x, dtype=float) - self.center
        return z, np.sqrt(np.sum(z * z, axis=-1)) / self.radius

    @staticmethod
    def _profile(s):
        out = np.zeros_like(s)
        m = s < 1.0
        out[m] = np.exp(1.0 - 1.0 / (1.0 - s[m] ** 2))
        return out

    def __call__(self, x):
        _, s = self._s(x)
        return self.amplitude * self._profile(s)

    def gradient(self, x):
        z, s = self._s(x)
        g = self._profile(s)
        coef = np.zeros_like(s)
        m = s < 1.0
        coef[m] = -2.0 * self.amplitude * g[m] / (self.radius ** 2 * (1.0 - s[m] ** 2) ** 2)
        return coef[..., None] * z

    def laplacian(self, x):
        z, s = self._s(x)
        d = z.shape[-1]
        out = np.zeros_like(s)
        m = s < 1.0
        sm = s[m]
        om = 1.0 - sm ** 2
        g = np.exp(1.0 - 1.0 / om)
        q = g / om ** 2
        dq = g * (-2.0 * sm / om ** 4 + 4.0 * sm / om ** 3)
        out[m] = -2.0 * self.amplitude / self.radius ** 2 * (d * q + sm * dq)
        return out

    def to_dict(self):
        return {"kind": self.kind, "center": self.center.tolist(),
                "radius": self.radius, "amplitude": self.amplitude}


class _Radial(ScalarField):
    """Radial fields singular at the origin; evaluation there is an error."""

    def _r(self, x, strict=True):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum(x * x, axis=-1))
        if strict and np.any(r == 0.0):
            idx = np.unravel_index(int(np.flatnonzero(r.ravel() == 0.0)[0]), r.shape)
            raise NonFiniteFieldError(
                f"{self.kind} is singular at the origin (point {x[idx].tolist()})",
                point=x[idx])
        return x, r


@dataclass(eq=False)
class CounterexampleW(_Radial):
    """``w(x) = ln(1 + 1/|x|) / ln 2``."""

    dim: int
    kind = "counterexample_w"

    def __call__(self, x):
        _, r = self._r(x)
        return np.log1p(1.0 / r) / LN2

    def radial_derivative(self, r):
        return -1.0 / (LN2 * (r * r + r))

    def gradient(self, x):
        x, r = self._r(x)
        return (self.radial_derivative(r) / r)[..., None] * x

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}


@dataclass(eq=False)
class PresetPhi(_Radial):
    """``Phi(x) = ln ln(1 + 1/|x|)``."""

    dim: int
    kind = "preset_phi"

    def __call__(self, x):
        _, r = self._r(x)
        return np.log(np.log1p(1.0 / r))

    def gradient(self, x):
        x, r = self._r(x)
        dphi = -1.0 / (np.log1p(1.0 / r) * (r * r + r))
        return (dphi / r)[..., None] * x

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}


@dataclass(eq=False)
class GriddedScalar(ScalarField):
    """P1 function given by nodal values on a mesh (zero outside it)."""

    mesh: object
    values: np.ndarray
    kind = "gridded"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.num_vertices,):
            raise InputError("gridded scalar needs one value per mesh vertex")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        el = self.mesh.locate(flat)
        out = np.zeros(len(flat))
        ok = el >= 0
        if ok.any():
            e = el[ok]
            lam = np.einsum("eia,ea->ei", self.mesh.grads[e],
                            flat[ok] - self.mesh.vertices[self.mesh.simplices[e, 0]])
            lam[:, 0] += 1.0
            out[ok] = np.sum(lam * self.values[self.mesh.simplices[e]], axis=1)
        return out.reshape(x.shape[:-1])

    def sample(self, mesh, lam):
        if mesh is self.mesh:
            return self.values[mesh.simplices] @ lam.T
        return super().sample(mesh, lam)

    def element_values(self, mesh):
        if mesh is self.mesh:
            return self.values[mesh.simplices].mean(axis=1)
        return super().element_values(mesh)

    def nodal(self, mesh):
        if mesh is self.mesh:
            return self.values.copy()
        return super().nodal(mesh)

    def to_dict(self):
        return {"kind": self.kind, "n": self.mesh.n, "num_values": len(self.values)}


@dataclass(eq=False)
class PerimeterWave(ScalarField):
    """``sin(2 pi * frequency * arclength)`` along the outer boundary of a 2D box.

    Arclength is measured counterclockwise from the corner ``(lo_x, lo_y)``
    for the boundary point nearest to ``x``.
    """

    box: tuple
    frequency: float = 1.0
    kind = "perimeter_wave"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        (x0, x1), (y0, y1) = self.box
        wx, wy = x1 - x0, y1 - y0
        px = np.clip(x[..., 0], x0, x1)
        py = np.clip(x[..., 1], y0, y1)
        dists = np.stack([py - y0, x1 - px, y1 - py, px - x0], axis=-1)
        side = np.argmin(dists, axis=-1)
        s = np.select(
            [side == 0, side == 1, side == 2],
            [px - x0, wx + (py - y0), wx + wy + (x1 - px)],
            default=2 * wx + wy + (y1 - py),
        )
        return np.sin(2.0 * np.pi * self.frequency * s)

    def to_dict(self):
        return {"kind": self.kind, "box": [list(b) for b in self.box],
                "frequency": self.frequency}


@dataclass(eq=False)
class ProductSine(ScalarField):
    """``amplitude * prod_k sin(pi (x_k - lo_k) / L_k)`` on a box; zero on its boundary."""

    box: tuple
    amplitude: float = 1.0
    kind = "product_sine"

    def _parts(self, x):
        x = np.asarray(x, dtype=float)
        lo = np.array([b[0] for b in self.box])
        L = np.array([b[1] - b[0] for b in self.box])
        arg = np.pi * (x - lo) / L
        return arg, L

    def __call__(self, x):
        arg, _ = self._parts(x)
        return self.amplitude * np.prod(np.sin(arg), axis=-1)

    def gradient(self, x):
        arg, L = self._parts(x)
        s, c = np.sin(arg), np.cos(arg)
        d = arg.shape[-1]
        out = np.empty(arg.shape)
        for k in range(d):
            others = np.prod(np.delete(s, k, axis=-1), axis=-1)
            out[..., k] = self.amplitude * np.pi / L[k] * c[..., k] * others
        return out

    def laplacian(self, x):
        arg, L = self._parts(x)
        return -np.sum((np.pi / L) ** 2) * self(x)

    def to_dict(self):
        return {"kind": self.kind, "box": [list(b) for b in self.box],
                "amplitude": self.amplitude}


@dataclass(eq=False)
class ManufacturedLoad(ScalarField):
    """Load ``f = -div(A grad u) + <H, grad u> + c u`` for constant A, H, c and smooth u."""

    u: ScalarField
    A: np.ndarray
    H: np.ndarray
    c: float = 0.0
    kind = "manufactured_load"

    def __call__(self, x):
        A = np.asarray(self.A, dtype=float)
        if not np.allclose(A, A[0, 0] * np.eye(len(A))):
            raise InputError("manufactured load supports scalar multiples of the identity")
        grad = self.u.gradient(x)
        return (-A[0, 0] * self.u.laplacian(x) + grad @ np.asarray(self.H, dtype=float)
                + self.c * self.u(x))

    def to_dict(self):
        return {"kind": self.kind, "u": self.u.to_dict(),
                "A": np.asarray(self.A).tolist(), "H": np.asarray(self.H).tolist(), "c": self.c}


# --------------------------------------------------------------------------
# vector fields
# --------------------------------------------------------------------------

class VectorField(Field):
    def magnitude(self, x):
        return np.linalg.norm(self(x), axis=-1)

    def __add__(self, other):
        return SumVector(self, other)

    def __mul__(self, other):
        return ScaledVector(self, float(other))

    __rmul__ = __mul__


@dataclass(eq=False)
class ZeroVector(VectorField):
    dim: int
    kind = "zero"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (self.dim,))


@dataclass(eq=False)
class ConstantVector(VectorField):
    vector: np.ndarray
    kind = "constant"

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=float)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.vector, x.shape[:-1] + self.vector.shape).copy()

    def to_dict(self):
        return {"kind": self.kind, "vector": self.vector.tolist()}


@dataclass(eq=False)
class GradientOf(VectorField):
    scalar: ScalarField
    kind = "gradient_of"

    def __call__(self, x):
        return self.scalar.gradient(x)

    def to_dict(self):
        return {"kind": self.kind, "scalar": self.scalar.to_dict()}


@dataclass(eq=False)
class NegGradLog(VectorField):
    """``-grad ln s = -grad s / s``."""

    scalar: ScalarField
    kind = "neg_grad_log"

    def __call__(self, x):
        return -self.scalar.gradient(x) / self.scalar(x)[..., None]

    def to_dict(self):
        return {"kind": self.kind, "scalar": self.scalar.to_dict()}


@dataclass(eq=False)
class SkewExample(VectorField):
    """``(d_d Phi, 0, ..., -d_1 Phi)`` for ``Phi = ln ln(1 + 1/|x - center|)``.

    Element values are the gradient of the face-barycenter (nonconforming P1)
    interpolant of ``Phi``, rotated the same way. They are exactly weakly
    divergence-free against P1 hat functions, and face barycenters of lattice
    meshes never coincide with lattice points, so the singular point is never
    sampled when the center is a lattice vertex.
    """

    dim: int
    center: Optional[np.ndarray] = None
    kind = "skew_example"

    def __post_init__(self):
        if self.dim < 2:
            raise InputError("skew_example needs dim >= 2")
        c = np.zeros(self.dim) if self.center is None else np.asarray(self.center, dtype=float)
        self.center = c
        self.phi = PresetPhi(self.dim)

    def _rotate(self, g):
        out = np.zeros_like(g)
        out[..., 0] = g[..., -1]
        out[..., -1] = -g[..., 0]
        return out

    def potential(self, x):
        return self.phi(np.asarray(x, dtype=float) - self.center)

    def __call__(self, x):
        return self._rotate(self.phi.gradient(np.asarray(x, dtype=float) - self.center))

    def element_values(self, mesh):
        d = mesh.dim
        X = mesh.vertices[mesh.simplices]
        total = X.sum(axis=1)
        # face opposite local vertex k has barycenter (total - X_k) / d
        fb = (total[:, None, :] - X) / d
        phi_f = _check_finite(self.potential(fb), fb, "skew_example potential",
                              np.arange(mesh.num_elements))
        grad = -d * np.einsum("ek,eka->ea", phi_f, mesh.grads)
        return self._rotate(grad)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim, "center": self.center.tolist()}


@dataclass(eq=False)
class GriddedVector(VectorField):
    """Piecewise-constant vector field given per element of a mesh (zero outside)."""

    mesh: object
    values: np.ndarray
    kind = "gridded"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.num_elements, self.mesh.dim):
            raise InputError("gridded vector needs one d-vector per mesh element")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        el = self.mesh.locate(flat)
        out = np.where((el >= 0)[:, None], self.values[np.maximum(el, 0)], 0.0)
        return out.reshape(x.shape)

    def sample(self, mesh, lam):
        if mesh is self.mesh:
            return np.repeat(self.values[:, None, :], len(lam), axis=1)
        return super().sample(mesh, lam)

    def element_values(self, mesh):
        if mesh is self.mesh:
            return self.values.copy()
        return super().element_values(mesh)

    def to_dict(self):
        return {"kind": self.kind, "n": self.mesh.n, "num_elements": len(self.values)}


@dataclass(eq=False)
class ScaledVector(VectorField):
    base: VectorField
    factor: float
    kind = "scaled"

    def __call__(self, x):
        return self.factor * self.base(x)

    def sample(self, mesh, lam):
        return self.factor * self.base.sample(mesh, lam)

    def element_values(self, mesh):
        return self.factor * self.base.element_values(mesh)

    def to_dict(self):
        return {"kind": self.kind, "factor": self.factor, "base": self.base.to_dict()}


@dataclass(eq=False)
class SumVector(VectorField):
    first: VectorField
    second: VectorField
    kind = "sum"

    def __call__(self, x):
        return self.first(x) + self.second(x)

    def sample(self, mesh, lam):
        return self.first.sample(mesh, lam) + self.second.sample(mesh, lam)

    def element_values(self, mesh):
        return self.first.element_values(mesh) + self.second.element_values(mesh)

    def to_dict(self):
        return {"kind": self.kind, "terms": [self.first.to_dict(), self.second.to_dict()]}


# --------------------------------------------------------------------------
# matrix fields
# --------------------------------------------------------------------------

class MatrixField(Field):
    """Matrix-valued coefficient with declared entry bound ``M`` and ellipticity ``lam``."""

    M: float
    lam: float

    def transpose(self):
        return TransposedMatrix(self)

    def spot_check(self, points, rng=None, nvec=8):
        """True if entries <= M and <A xi, xi> >= lam |xi|^2 on random xi."""
        rng = np.random.default_rng(rng)
        A = self(np.asarray(points, dtype=float))
        A = A.reshape(-1, A.shape[-2], A.shape[-1])
        if np.max(np.abs(A)) > self.M * (1 + 1e-12):
            return False
        xi = rng.standard_normal((nvec, A.shape[-1]))
        quad = np.einsum("va,eab,vb->ev", xi, A, xi)
        return bool(np.all(quad >= self.lam * np.sum(xi * xi, axis=1) * (1 - 1e-12)))


@dataclass(eq=False)
class IdentityMatrix(MatrixField):
    dim: int
    kind = "identity"

    def __post_init__(self):
        self.M = 1.0
        self.lam = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(self.dim), x.shape[:-1] + (self.dim, self.dim)).copy()

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}


def _declared_bounds(mats):
    M = max(float(np.max(np.abs(m))) for m in mats)
    lam = min(float(np.min(np.linalg.eigvalsh(0.5 * (m + m.T)))) for m in mats)
    return M, lam


@dataclass(eq=False)
class ConstantMatrix(MatrixField):
    matrix: np.ndarray
    kind = "constant"

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        self.M, self.lam = _declared_bounds([self.matrix])
        if self.lam <= 0:
            raise InputError("constant matrix is not uniformly elliptic")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.matrix, x.shape[:-1] + self.matrix.shape).copy()

    def to_dict(self):
        return {"kind": self.kind, "matrix": self.matrix.tolist()}


@dataclass(eq=False)
class Checkerboard(MatrixField):
    """``M1`` on cells with even index sum, ``M2`` on odd ones (cells of side ``cell``)."""

    M1: np.ndarray
    M2: np.ndarray
    cell: float
    kind = "checkerboard"

    def __post_init__(self):
        self.M1 = np.asarray(self.M1, dtype=float)
        self.M2 = np.asarray(self.M2, dtype=float)
        if not self.cell > 0:
            raise InputError("checkerboard cell size must be positive")
        self.M, self.lam = _declared_bounds([self.M1, self.M2])
        if self.lam <= 0:
            raise InputError("checkerboard matrices are not uniformly elliptic")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        parity = np.sum(np.floor(x / self.cell).astype(np.int64), axis=-1) % 2
        return np.where((parity == 0)[..., None, None], self.M1, self.M2)

    def to_dict(self):
        return {"kind": self.kind, "M1": self.M1.tolist(), "M2": self.M2.tolist(),
                "cell": self.cell}


@dataclass(eq=False)
class TransposedMatrix(MatrixField):
    base: MatrixField
    kind = "transpose"

    def __post_init__(self):
        self.M = self.base.M
        self.lam = self.base.lam

    def __call__(self, x):
        return np.swapaxes(self.base(x), -1, -2)

    def element_values(self, mesh):
        return np.swapaxes(self.base.element_values(mesh), -1, -2)

    def transpose(self):
        return self.base


@dataclass(eq=False)
class GriddedMatrix(MatrixField):
    """Per-element matrices on a mesh."""

    mesh: object
    values: np.ndarray
    M: float = float("nan")
    lam: float = float("nan")
    kind = "gridded"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        el = self.mesh.locate(flat)
        if np.any(el < 0):
            raise InputError("gridded matrix evaluated outside its mesh")
        return self.values[el].reshape(x.shape[:-1] + self.values.shape[1:])

    def element_values(self, mesh):
        if mesh is self.mesh:
            return self.values.copy()
        return super().element_values(mesh)


# --------------------------------------------------------------------------
# drift description and presets
# --------------------------------------------------------------------------

@dataclass(eq=False)
class DriftSpec:
    """``H = H1 + H2`` with ``div H2 = div_H2`` weakly.

    ``p`` is the declared integrability exponent of ``H1`` (``p > d``) and
    ``q_tilde`` that of ``div_H2`` (``q_tilde > d/2``).
    """

    H1: VectorField
    H2: VectorField
    div_H2: ScalarField
    p: float = math.inf
    q_tilde: float = math.inf

    @property
    def total(self) -> VectorField:
        if isinstance(self.H2, ZeroVector):
            return self.H1
        if isinstance(self.H1, ZeroVector):
            return self.H2
        return SumVector(self.H1, self.H2)

    def check_exponents(self, d):
        if not self.p > d:
            raise InputError(f"declared exponent p={self.p} must exceed d={d}")
        if not self.q_tilde > d / 2:
            raise InputError(f"declared exponent q_tilde={self.q_tilde} must exceed d/2={d / 2}")

    def to_dict(self):
        return {"H1": self.H1.to_dict(), "H2": self.H2.to_dict(),
                "div_H2": self.div_H2.to_dict(), "p": _json_num(self.p),
                "q_tilde": _json_num(self.q_tilde)}


def _json_num(x):
    return "inf" if x == math.inf else x


def preset_counterexample(dim: int):
    """``w = ln(1 + 1/|x|)/ln 2`` and ``H = -grad ln w``.

    Returns ``(w, H, outside_regime)``; ``outside_regime`` is True for
    ``dim == 2``.
    """
    if dim not in (2, 3):
        raise InputError(f"counterexample preset supports dim 2 or 3, got {dim}")
    w = CounterexampleW(dim)
    return w, NegGradLog(w), dim < 3


def preset_skew_example(dim: int, center=None):
    """``Phi = ln ln(1 + 1/|x|)`` and the rotated gradient ``H2`` with zero divergence."""
    H2 = SkewExample(dim, center)
    return H2.phi, H2


def preset_gradient_bump(center, radius, amplitude, container_box=None):
    """Bump potential ``V`` and ``H = grad V``.

    ``container_box`` (per-axis bounds) is checked to contain the closed
    support strictly.
    """
    V = Bump(np.asarray(center, dtype=float), float(radius), float(amplitude))
    if container_box is not None:
        box = np.asarray(container_box, dtype=float)
        if np.any(V.center - radius <= box[:, 0]) or np.any(V.center + radius >= box[:, 1]):
            raise InputError("bump support touches the container boundary")
    return V, GradientOf(V)
