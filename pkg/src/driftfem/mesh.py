"""Kuhn lattice meshes of boxes and punctured boxes.

All vertex coordinates are produced by the single formula
``lo + (span * j) / n`` with integer lattice index ``j``. Inner meshes,
container meshes and refinements therefore share bitwise identical
coordinates on common lattice points.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import InputError, MeshError

INNER = 0
CONTAINER_ONLY = 1


def _as_box(box, dim, name):
    arr = np.asarray(box, dtype=float)
    if arr.shape != (dim, 2):
        raise InputError(f"{name} must have shape ({dim}, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite bounds")
    return arr


@dataclass(frozen=True)
class DomainSpec:
    """Axis-aligned box, optionally with a box-shaped hole.

    Parameters
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    inner_box : sequence of (lo, hi)
        Bounds of the physical domain per axis.
    hole : sequence of (lo, hi), optional
        Removed box, strictly inside ``inner_box``.
    container_padding : float
        Fraction of the inner span added on each side for the container box.
    """

    dim: int
    inner_box: tuple
    hole: Optional[tuple] = None
    container_padding: float = 0.25

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise InputError(f"dim must be 2 or 3, got {self.dim}")
        box = _as_box(self.inner_box, self.dim, "inner_box")
        if np.any(box[:, 1] <= box[:, 0]):
            ax = int(np.argmax(box[:, 1] <= box[:, 0]))
            raise MeshError(f"inner_box has nonpositive extent on axis {ax}", axis=ax)
        object.__setattr__(self, "inner_box", tuple(map(tuple, box.tolist())))
        if self.hole is not None:
            hole = _as_box(self.hole, self.dim, "hole")
            for ax in range(self.dim):
                if not (box[ax, 0] < hole[ax, 0] < hole[ax, 1] < box[ax, 1]):
                    raise MeshError(
                        f"hole is not strictly inside inner_box on axis {ax}", axis=ax)
            object.__setattr__(self, "hole", tuple(map(tuple, hole.tolist())))
        if not (self.container_padding >= 0 and math.isfinite(self.container_padding)):
            raise InputError("container_padding must be a finite number >= 0")

    @classmethod
    def unit_box(cls, dim, hole=None, container_padding=0.25):
        return cls(dim, tuple((0.0, 1.0) for _ in range(dim)), hole, container_padding)

    @classmethod
    def symmetric(cls, dim, half_width=1.0, hole_half_width=None, container_padding=0.25):
        """Box ``[-a, a]^dim`` with optional centered hole ``[-b, b]^dim``."""
        box = tuple((-half_width, half_width) for _ in range(dim))
        hole = None
        if hole_half_width is not None:
            hole = tuple((-hole_half_width, hole_half_width) for _ in range(dim))
        return cls(dim, box, hole, container_padding)

    @property
    def lo(self):
        return np.array([b[0] for b in self.inner_box])

    @property
    def span(self):
        return np.array([b[1] - b[0] for b in self.inner_box])

    @property
    def volume(self):
        vol = float(np.prod(self.span))
        if self.hole is not None:
            vol -= float(np.prod([b[1] - b[0] for b in self.hole]))
        return vol

    def to_dict(self):
        return {
            "dim": self.dim,
            "inner_box": [list(b) for b in self.inner_box],
            "hole": None if self.hole is None else [list(b) for b in self.hole],
            "container_padding": self.container_padding,
        }


@dataclass(frozen=True)
class Lattice:
    """Integer lattice description of a meshed box.

    Lattice point ``j`` sits at ``lo + (span * j) / n``. Vertices carry
    indices ``idx_lo <= j <= idx_hi``; cells ``idx_lo <= c < idx_hi``.
    """

    lo: np.ndarray
    span: np.ndarray
    n: int
    idx_lo: np.ndarray
    idx_hi: np.ndarray
    hole_lo: Optional[np.ndarray] = None
    hole_hi: Optional[np.ndarray] = None

    @property
    def dim(self):
        return len(self.lo)

    @property
    def step(self):
        return self.span / self.n

    @property
    def ncell(self):
        return self.idx_hi - self.idx_lo

    @property
    def npoint(self):
        return self.ncell + 1

    def coords(self, j):
        return self.lo + (self.span * j) / self.n

    def in_open_hole(self, j):
        if self.hole_lo is None:
            return np.zeros(len(j), dtype=bool)
        return np.all((j > self.hole_lo) & (j < self.hole_hi), axis=1)

    def in_closed_hole(self, j):
        if self.hole_lo is None:
            return np.zeros(len(j), dtype=bool)
        return np.all((j >= self.hole_lo) & (j <= self.hole_hi), axis=1)

    def hole_cell(self, c):
        if self.hole_lo is None:
            return np.zeros(len(c), dtype=bool)
        return np.all((c >= self.hole_lo) & (c < self.hole_hi), axis=1)


def _flat(j, lo, shape):
    out = np.zeros(len(j), dtype=np.int64)
    for a in range(j.shape[1]):
        out = out * shape[a] + (j[:, a] - lo[a])
    return out


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming Kuhn triangulation.

    Attributes
    ----------
    vertices : (nv, d) float array
    simplices : (ne, d+1) int array, positively oriented
    boundary_vertices : sorted int array of boundary vertex ids
    region_tag : (nv,) int array, ``INNER`` or ``CONTAINER_ONLY``
    h : float
        Maximum simplex diameter (lattice cell diagonal).
    """

    dim: int
    vertices: np.ndarray
    simplices: np.ndarray
    boundary_vertices: np.ndarray
    region_tag: np.ndarray
    h: float
    lattice: Lattice = field(repr=False)
    lattice_index: np.ndarray = field(repr=False)
    vertex_lookup: np.ndarray = field(repr=False)
    elem_lookup: np.ndarray = field(repr=False)
    elem_cell: np.ndarray = field(repr=False)
    elem_perm: np.ndarray = field(repr=False)
    domain: Optional[DomainSpec] = field(default=None, repr=False)
    role: str = "inner"

    @property
    def n(self):
        return self.lattice.n

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_elements(self):
        return len(self.simplices)

    @cached_property
    def is_boundary(self):
        mask = np.zeros(self.num_vertices, dtype=bool)
        mask[self.boundary_vertices] = True
        return mask

    @cached_property
    def interior_vertices(self):
        return np.flatnonzero(~self.is_boundary)

    @cached_property
    def _geometry(self):
        vol, grads = _kernels.element_geometry(self.vertices, self.simplices)
        return vol, grads

    @property
    def volumes(self):
        return self._geometry[0]

    @property
    def grads(self):
        """Gradients of barycentric coordinates, shape (ne, d+1, d)."""
        return self._geometry[1]

    @cached_property
    def barycenters(self):
        return self.vertices[self.simplices].mean(axis=1)

    @cached_property
    def element_region(self):
        """Per-element tag: ``INNER`` if the element lies in the inner box."""
        if self.domain is None or self.role == "inner":
            return np.zeros(self.num_elements, dtype=np.int64)
        tags = self.region_tag[self.simplices]
        return np.where(np.all(tags == INNER, axis=1), INNER, CONTAINER_ONLY)

    @property
    def total_volume(self):
        return float(np.sum(self.volumes))

    def locate(self, points):
        """Element id containing each point, -1 outside the mesh."""
        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=float)
        lat = self.lattice
        return _kernels.locate(pts, lat.lo, lat.step, lat.idx_lo.astype(float),
                               lat.ncell.astype(np.int64), self.elem_lookup)

    def vertex_at(self, point, atol=1e-9):
        """Id of the vertex at ``point``; raises if it is not a mesh vertex."""
        lat = self.lattice
        p = np.asarray(point, dtype=float)
        jf = (p - lat.lo) / lat.step
        j = np.rint(jf).astype(np.int64)
        if np.any(np.abs(jf - j) > atol * max(1.0, float(np.max(np.abs(jf))))):
            raise InputError(f"point {p.tolist()} is not a lattice vertex")
        if np.any(j < lat.idx_lo) or np.any(j > lat.idx_hi):
            raise InputError(f"point {p.tolist()} is outside the mesh")
        vid = int(self.vertex_lookup[_flat(j[None, :], lat.idx_lo, lat.npoint)[0]])
        if vid < 0:
            raise InputError(f"point {p.tolist()} lies inside the hole")
        return vid

    def nearest_vertex(self, point, candidates=None):
        """Vertex closest to ``point`` (ties resolved by lowest id)."""
        ids = np.arange(self.num_vertices) if candidates is None else np.asarray(candidates)
        dist = np.linalg.norm(self.vertices[ids] - np.asarray(point, dtype=float), axis=1)
        return int(ids[np.argmin(dist)])

    def p1_gradient(self, nodal):
        """Per-element gradient of the P1 interpolant of ``nodal``."""
        return np.einsum("ei,eia->ea", np.asarray(nodal)[self.simplices], self.grads)


def _build(lattice: Lattice, domain: Optional[DomainSpec], role: str,
           inner_lo=None, inner_hi=None) -> Mesh:
    d = lattice.dim
    npoint = lattice.npoint
    ncell = lattice.ncell
    grid = np.indices(tuple(npoint)).reshape(d, -1).T + lattice.idx_lo
    keep = ~lattice.in_open_hole(grid)
    lattice_index = grid[keep]
    vertex_lookup = np.full(len(grid), -1, dtype=np.int64)
    vertex_lookup[keep] = np.arange(int(keep.sum()))
    vertices = lattice.coords(lattice_index)

    on_outer = np.any((lattice_index == lattice.idx_lo) | (lattice_index == lattice.idx_hi), axis=1)
    on_hole = lattice.in_closed_hole(lattice_index)
    boundary = np.flatnonzero(on_outer | on_hole)

    if inner_lo is None:
        region = np.full(len(lattice_index), INNER, dtype=np.int64)
    else:
        inside = np.all((lattice_index >= inner_lo) & (lattice_index <= inner_hi), axis=1)
        region = np.where(inside, INNER, CONTAINER_ONLY)

    cells = np.indices(tuple(ncell)).reshape(d, -1).T + lattice.idx_lo
    cell_keep = ~lattice.hole_cell(cells)
    kept = cells[cell_keep]
    perms = list(itertools.permutations(range(d)))
    nperm = len(perms)
    eye = np.eye(d, dtype=np.int64)
    simp = np.empty((len(kept), nperm, d + 1), dtype=np.int64)
    for r, perm in enumerate(perms):
        path = [kept]
        cur = kept
        for a in perm:
            cur = cur + eye[a]
            path.append(cur)
        ids = [vertex_lookup[_flat(p, lattice.idx_lo, npoint)] for p in path]
        sign = _perm_sign(perm)
        if sign < 0:
            ids[0], ids[1] = ids[1], ids[0]
        simp[:, r, :] = np.stack(ids, axis=1)
    simplices = simp.reshape(-1, d + 1)
    elem_cell = np.repeat(_flat(kept, lattice.idx_lo, ncell), nperm)
    elem_perm = np.tile(np.arange(nperm), len(kept))

    elem_lookup = np.full((len(cells), nperm), -1, dtype=np.int64)
    elem_lookup[np.flatnonzero(cell_keep)] = np.arange(len(simplices)).reshape(-1, nperm)

    h = float(np.sqrt(np.sum(lattice.step ** 2)))
    return Mesh(
        dim=d, vertices=vertices, simplices=simplices, boundary_vertices=boundary,
        region_tag=region, h=h, lattice=lattice, lattice_index=lattice_index,
        vertex_lookup=vertex_lookup, elem_lookup=elem_lookup, elem_cell=elem_cell,
        elem_perm=elem_perm, domain=domain, role=role,
    )


def _perm_sign(perm):
    sign = 1
    p = list(perm)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


def _hole_indices(domain: DomainSpec, n: int):
    if domain.hole is None:
        return None, None
    if n < 3:
        raise MeshError(f"n={n} is too small to separate the hole from the outer boundary")
    lo, span = domain.lo, domain.span
    hl = np.empty(domain.dim, dtype=np.int64)
    hh = np.empty(domain.dim, dtype=np.int64)
    for ax, (a, b) in enumerate(domain.hole):
        for k, val in enumerate((a, b)):
            t = (val - lo[ax]) / span[ax] * n
            r = round(t)
            if abs(t - r) > 1e-9 * max(1.0, abs(t)):
                raise MeshError(
                    f"hole face {val!r} on axis {ax} is not aligned with the lattice "
                    f"of step {span[ax] / n!r}", axis=ax)
            (hl if k == 0 else hh)[ax] = r
    if np.any(hl < 1) or np.any(hh > n - 1) or np.any(hh <= hl):
        ax = int(np.argmax((hl < 1) | (hh > n - 1) | (hh <= hl)))
        raise MeshError(f"n={n} is too small to separate the hole from the outer boundary", axis=ax)
    return hl, hh


def _check_n(n):
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise InputError(f"n must be an integer, got {n!r}")
    if n < 1:
        raise MeshError(f"n must be >= 1, got {n}")


def build_mesh(domain: DomainSpec, n: int) -> Mesh:
    """Kuhn triangulation of ``domain`` with ``n`` cells per axis."""
    _check_n(n)
    hl, hh = _hole_indices(domain, n)
    d = domain.dim
    lattice = Lattice(domain.lo, domain.span, int(n), np.zeros(d, dtype=np.int64),
                      np.full(d, n, dtype=np.int64), hl, hh)
    return _build(lattice, domain, "inner")


def _padding_cells(domain: DomainSpec, n: int) -> int:
    pad = domain.container_padding
    if pad <= 0:
        raise MeshError("container_padding must be > 0: the weight needs a strictly larger domain")
    t = pad * n
    r = round(t)
    if r < 1 or abs(t - r) > 1e-9 * max(1.0, t):
        raise MeshError(
            f"container_padding={pad!r} is not a multiple of the lattice step 1/{n}; "
            f"use a multiple of {1.0 / n!r} (fraction of the span)")
    return int(r)


def container_mesh(domain: DomainSpec, n: int):
    """Mesh of the padded box and the inner-vertex map into it.

    Returns
    -------
    mesh : Mesh
        Padded box; the hole of ``domain`` is kept.
    inner_vertex_map : (nv_inner,) int array
        Container vertex id of every vertex of ``build_mesh(domain, n)``.
    """
    _check_n(n)
    p = _padding_cells(domain, n)
    hl, hh = _hole_indices(domain, n)
    d = domain.dim
    lattice = Lattice(domain.lo, domain.span, int(n), np.full(d, -p, dtype=np.int64),
                      np.full(d, n + p, dtype=np.int64), hl, hh)
    mesh = _build(lattice, domain, "container", np.zeros(d, dtype=np.int64),
                  np.full(d, n, dtype=np.int64))
    inner = build_mesh(domain, n)
    return mesh, inner_vertex_map(inner, mesh)


def inner_vertex_map(inner: Mesh, container: Mesh) -> np.ndarray:
    lat = container.lattice
    ids = container.vertex_lookup[_flat(inner.lattice_index, lat.idx_lo, lat.npoint)]
    if np.any(ids < 0):
        raise MeshError("inner mesh is not embedded in the container lattice")
    return ids


def inner_element_map(inner: Mesh, container: Mesh) -> np.ndarray:
    """Container element id of every inner element (same cell, same permutation)."""
    if inner.lattice.n != container.lattice.n:
        raise MeshError("meshes have different resolutions")
    li, lc = inner.lattice, container.lattice
    d = inner.dim
    cells = np.empty((inner.num_elements, d), dtype=np.int64)
    rem = inner.elem_cell.copy()
    for a in range(d - 1, -1, -1):
        cells[:, a] = rem % li.ncell[a] + li.idx_lo[a]
        rem //= li.ncell[a]
    flat = _flat(cells, lc.idx_lo, lc.ncell)
    out = container.elem_lookup[flat, inner.elem_perm]
    if np.any(out < 0):
        raise MeshError("inner mesh is not embedded in the container lattice")
    return out


def refine_uniform(mesh: Mesh) -> Mesh:
    """Same domain with twice as many cells per axis."""
    if mesh.domain is None:
        raise InputError("mesh has no domain description")
    n2 = 2 * mesh.lattice.n
    if mesh.role == "container":
        return container_mesh(mesh.domain, n2)[0]
    return build_mesh(mesh.domain, n2)


def restrict_to_inner(values: np.ndarray, vmap: np.ndarray) -> np.ndarray:
    return np.asarray(values)[vmap]
