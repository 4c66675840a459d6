"""Simplicial (1D/2D) and tensor-product rectangular meshes.

Meshes are immutable; refinement returns a new mesh. Triangles are stored
counter-clockwise, rectangles as (x0,y0) (x1,y0) (x1,y1) (x0,y1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import sparse

from .errors import PointOutsideMesh, UnsupportedDomain

BOUNDARY_TOL = 1e-12


def _frozen(a, dtype) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Star:
    center: int
    elements: np.ndarray
    h: float
    h_axes: tuple[float, ...] | None = None


@dataclass(frozen=True, eq=False)
class Mesh:
    dim: int
    kind: str
    nodes: np.ndarray
    elements: np.ndarray
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    axes: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("simplicial", "tensor"):
            raise ValueError(f"unknown mesh kind {self.kind!r}")
        object.__setattr__(self, "nodes", _frozen(np.reshape(self.nodes, (-1, self.dim)), float))
        object.__setattr__(self, "elements", _frozen(self.elements, np.int64))
        if self.axes is not None:
            object.__setattr__(self, "axes", tuple(_frozen(a, float) for a in self.axes))

    # -- counts -----------------------------------------------------------
    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_elements(self) -> int:
        return len(self.elements)

    @cached_property
    def boundary(self) -> np.ndarray:
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        scale = np.maximum(np.abs(hi - lo), 1.0)
        on = (np.abs(self.nodes - lo) <= BOUNDARY_TOL * scale) | (
            np.abs(self.nodes - hi) <= BOUNDARY_TOL * scale
        )
        return _frozen(on.any(axis=1), bool)

    @property
    def domain_measure(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    @cached_property
    def element_vertices(self) -> np.ndarray:
        return self.nodes[self.elements]

    # -- geometry ---------------------------------------------------------
    @cached_property
    def measures(self) -> np.ndarray:
        v = self.element_vertices
        if self.dim == 1:
            return np.abs(v[:, 1, 0] - v[:, 0, 0])
        if self.kind == "tensor":
            s = self.sizes
            return s[:, 0] * s[:, 1]
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def sizes(self) -> np.ndarray:
        """Per-axis element extents (E, dim)."""
        v = self.element_vertices
        return v.max(axis=1) - v.min(axis=1)

    @cached_property
    def diameters(self) -> np.ndarray:
        v = self.element_vertices
        k = v.shape[1]
        best = np.zeros(len(v))
        for i in range(k):
            for j in range(i + 1, k):
                best = np.maximum(best, np.linalg.norm(v[:, i] - v[:, j], axis=1))
        return best

    @cached_property
    def inradii(self) -> np.ndarray:
        """Diameter of the inscribed ball (1D convention: the element length)."""
        if self.dim == 1:
            return self.diameters.copy()
        if self.kind == "tensor":
            return self.sizes.min(axis=1)
        v = self.element_vertices
        per = sum(
            np.linalg.norm(v[:, (i + 1) % 3] - v[:, i], axis=1) for i in range(3)
        )
        return 4.0 * self.measures / per

    @property
    def max_h(self) -> float:
        return float(self.diameters.max())

    # -- connectivity -------------------------------------------------------
    @cached_property
    def incidence(self) -> sparse.csr_matrix:
        """Element-by-node incidence matrix."""
        E, k = self.elements.shape
        rows = np.repeat(np.arange(E), k)
        return sparse.csr_matrix(
            (np.ones(E * k), (rows, self.elements.ravel())), shape=(E, self.num_nodes)
        )

    @cached_property
    def node_elements(self) -> list[np.ndarray]:
        csc = self.incidence.tocsc()
        return [np.sort(csc.indices[csc.indptr[i]:csc.indptr[i + 1]]) for i in range(self.num_nodes)]

    @cached_property
    def element_neighbors(self) -> sparse.csr_matrix:
        """Boolean E x E matrix: elements sharing at least one node."""
        a = (self.incidence @ self.incidence.T).tocsr()
        a.data[:] = 1.0
        return a

    def star(self, z: int) -> Star:
        els = self.node_elements[z]
        h = float(self.diameters[els].min())
        h_axes = None
        if self.kind == "tensor":
            h_axes = tuple(float(v) for v in self.sizes[els].min(axis=0))
        return Star(int(z), els, h, h_axes)

    def patch(self, e: int) -> np.ndarray:
        row = self.element_neighbors.getrow(e)
        return np.sort(row.indices)

    # -- validation -----------------------------------------------------------
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique edges (sorted node pairs) and their element counts (2D simplicial)."""
        v = self.elements
        pairs = np.concatenate([v[:, [0, 1]], v[:, [1, 2]], v[:, [2, 0]]])
        pairs = np.sort(pairs, axis=1)
        uniq, counts = np.unique(pairs, axis=0, return_counts=True)
        return uniq, counts

    def check_conforming(self) -> None:
        """Raise ``ValueError`` if the mesh is not a conforming partition."""
        if not math.isclose(self.measures.sum(), self.domain_measure, rel_tol=1e-12):
            raise ValueError("element measures do not add up to the domain measure")
        if (self.measures <= 0).any():
            raise ValueError("degenerate or inverted element")
        if self.dim == 1:
            order = np.argsort(self.element_vertices[:, 0, 0])
            v = self.element_vertices[order, :, 0]
            if not np.allclose(v[1:, 0], v[:-1, 1], rtol=0, atol=1e-14):
                raise ValueError("1D mesh has gaps or overlaps")
            return
        if self.kind == "tensor":
            return
        uniq, counts = self.edges()
        if (counts > 2).any():
            raise ValueError("edge shared by more than two triangles")
        bnd = uniq[counts == 1]
        if not (self.boundary[bnd[:, 0]] & self.boundary[bnd[:, 1]]).all():
            raise ValueError("hanging edge inside the domain")

    # -- point location -----------------------------------------------------
    @cached_property
    def _locator(self):
        if self.dim == 1 or self.kind == "tensor":
            return None
        E = self.num_elements
        nb = max(1, int(math.sqrt(E / 2)))
        lo = np.asarray(self.lower)
        cell = (np.asarray(self.upper) - lo) / nb
        v = self.element_vertices
        bmin = np.clip(np.floor((v.min(axis=1) - lo) / cell - 1e-9).astype(int), 0, nb - 1)
        bmax = np.clip(np.floor((v.max(axis=1) - lo) / cell + 1e-9).astype(int), 0, nb - 1)
        buckets: list[list[int]] = [[] for _ in range(nb * nb)]
        for e in range(E):
            for bx in range(bmin[e, 0], bmax[e, 0] + 1):
                for by in range(bmin[e, 1], bmax[e, 1] + 1):
                    buckets[bx * nb + by].append(e)
        width = max(len(b) for b in buckets)
        table = np.full((nb * nb, width), -1, dtype=np.int64)
        for i, b in enumerate(buckets):
            table[i, : len(b)] = b
        B = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
        return nb, lo, cell, table, np.linalg.inv(B)

    def locate(self, x) -> np.ndarray:
        """Index of an element containing each point (raises if outside)."""
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        tol = 1e-10
        if np.any(x < np.asarray(self.lower) - tol) or np.any(x > np.asarray(self.upper) + tol):
            raise PointOutsideMesh("point outside the mesh bounding box")
        if self.dim == 1:
            grid = self.axes[0] if self.axes is not None else np.sort(self.nodes[:, 0])
            idx = np.clip(np.searchsorted(grid, x[:, 0], side="right") - 1, 0, len(grid) - 2)
            return self._interval_order[idx]
        if self.kind == "tensor":
            ix = np.clip(np.searchsorted(self.axes[0], x[:, 0], side="right") - 1, 0, len(self.axes[0]) - 2)
            iy = np.clip(np.searchsorted(self.axes[1], x[:, 1], side="right") - 1, 0, len(self.axes[1]) - 2)
            return iy * (len(self.axes[0]) - 1) + ix
        nb, lo, cell, table, Binv = self._locator
        b = np.clip(np.floor((x - lo) / cell).astype(int), 0, nb - 1)
        cand = table[b[:, 0] * nb + b[:, 1]]
        safe = np.where(cand < 0, 0, cand)
        rel = x[:, None, :] - self.element_vertices[safe, 0]
        lam = np.einsum("pcij,pcj->pci", Binv[safe], rel)
        bary_min = np.minimum(np.minimum(lam[..., 0], lam[..., 1]), 1.0 - lam[..., 0] - lam[..., 1])
        bary_min = np.where(cand < 0, -np.inf, bary_min)
        best = np.argmax(bary_min, axis=1)
        if (bary_min[np.arange(len(x)), best] < -1e-9).any():
            raise PointOutsideMesh("point not covered by any element")
        return cand[np.arange(len(x)), best]

    @cached_property
    def _interval_order(self) -> np.ndarray:
        # element index of the k-th interval from the left
        return np.argsort(self.element_vertices[:, 0, 0])

    # -- output ---------------------------------------------------------------
    def dump(self, fh) -> None:
        """Write the plain-text node/element listing."""
        fh.write(f"# mesh dim={self.dim} kind={self.kind}\n")
        fh.write(f"# nodes {self.num_nodes}\n")
        for i, p in enumerate(self.nodes):
            fh.write(f"{i} " + " ".join(repr(float(c)) for c in p) + "\n")
        fh.write(f"# elements {self.num_elements}\n")
        for i, el in enumerate(self.elements):
            fh.write(f"{i} " + " ".join(str(int(n)) for n in el) + "\n")


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def _interval_mesh(points: np.ndarray) -> Mesh:
    points = np.asarray(points, dtype=float)
    if not np.all(np.diff(points) > 0):
        raise ValueError("partition must be strictly increasing")
    n = len(points) - 1
    el = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
    return Mesh(1, "simplicial", points.reshape(-1, 1), el, (points[0],), (points[-1],), (points,))


def _parse_box(domain) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(domain, str):
        if domain in ("unit-square", "unit_square", "square"):
            return np.zeros(2), np.ones(2)
        if domain in ("unit-interval", "unit_interval"):
            return np.zeros(1), np.ones(1)
        raise UnsupportedDomain(f"unknown domain {domain!r}")
    arr = np.asarray(domain, dtype=float)
    if arr.shape == (2,):
        return arr[:1], arr[1:]
    if arr.shape == (2, 2):
        return arr[:, 0], arr[:, 1]
    raise UnsupportedDomain(f"cannot interpret domain {domain!r}")


def structured_triangulation(lower, upper, nx: int, ny: int) -> Mesh:
    """Rectangle split into nx*ny squares, each cut along its SW-NE diagonal."""
    xs = np.linspace(lower[0], upper[0], nx + 1)
    ys = np.linspace(lower[1], upper[1], ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    a = j * (nx + 1) + i
    b = a + 1
    c = a + nx + 2
    d = a + nx + 1
    tris = np.empty((2 * len(a), 3), dtype=np.int64)
    tris[0::2] = np.column_stack([a, b, c])
    tris[1::2] = np.column_stack([a, c, d])
    return Mesh(2, "simplicial", nodes, tris, tuple(lower), tuple(upper))


def build_simplicial(domain, target_h: float) -> Mesh:
    """Uniform mesh of an interval or an axis-aligned rectangle with max h_T <= target_h."""
    if not target_h > 0:
        raise ValueError("target_h must be positive")
    lo, hi = _parse_box(domain)
    if len(lo) == 1:
        n = max(1, math.ceil((hi[0] - lo[0]) / target_h - 1e-9))
        return _interval_mesh(np.linspace(lo[0], hi[0], n + 1))
    if len(lo) == 2:
        # diameter of a cell triangle is the cell diagonal
        width = hi - lo
        n = max(1, math.ceil(math.hypot(*width) / target_h - 1e-9))
        return structured_triangulation(lo, hi, n, n)
    raise UnsupportedDomain("only 1D and 2D boxes are supported")


def build_tensor(partitions: Sequence[Sequence[float]]) -> Mesh:
    """Tensor-product mesh from one strictly increasing partition per axis."""
    axes = [np.asarray(p, dtype=float) for p in partitions]
    for a in axes:
        if len(a) < 2 or not np.all(np.diff(a) > 0):
            raise ValueError("each partition must be strictly increasing")
    if len(axes) == 1:
        m = _interval_mesh(axes[0])
        return Mesh(1, "tensor", m.nodes, m.elements, m.lower, m.upper, (axes[0],))
    if len(axes) != 2:
        raise UnsupportedDomain("tensor meshes are 1D or 2D")
    xs, ys = axes
    nx, ny = len(xs) - 1, len(ys) - 1
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    a = (j * (nx + 1) + i).ravel()
    quads = np.column_stack([a, a + 1, a + nx + 2, a + nx + 1])
    return Mesh(2, "tensor", nodes, quads, (xs[0], ys[0]), (xs[-1], ys[-1]), (xs, ys))


@dataclass(frozen=True)
class GradedPartition:
    height: float
    intervals: int
    grading: float

    def __post_init__(self):
        if self.intervals < 1 or self.grading < 1 or not self.height > 0:
            raise ValueError("need M >= 1, grading >= 1 and Y > 0")

    @property
    def points(self) -> np.ndarray:
        k = np.arange(self.intervals + 1)
        return (k / self.intervals) ** self.grading * self.height

    def refined(self) -> "GradedPartition":
        """Double M, which keeps the grading law on every level."""
        return GradedPartition(self.height, 2 * self.intervals, self.grading)


def graded_partition(Y: float, M: int, gamma: float) -> GradedPartition:
    return GradedPartition(float(Y), int(M), float(gamma))


def shape_diagnostics(mesh: Mesh) -> tuple[float, float]:
    """(max shape coefficient h_T/rho_T, max neighbor size ratio per axis)."""
    sigma = float((mesh.diameters / mesh.inradii).max())
    if mesh.kind == "tensor" or mesh.dim == 1:
        axes = mesh.axes if mesh.axes is not None else (np.sort(mesh.nodes[:, 0]),)
        weak = 1.0
        for a in axes:
            h = np.diff(a)
            if len(h) > 1:
                weak = max(weak, float(np.max(np.maximum(h[1:] / h[:-1], h[:-1] / h[1:]))))
        return sigma, weak
    nb = mesh.element_neighbors.tocoo()
    h = mesh.diameters
    weak = float(np.max(h[nb.row] / h[nb.col]))
    return sigma, weak


def _midpoint_refine_axis(a: np.ndarray) -> np.ndarray:
    out = np.empty(2 * len(a) - 1)
    out[0::2] = a
    out[1::2] = 0.5 * (a[1:] + a[:-1])
    return out


def refine_uniform(mesh: Mesh) -> Mesh:
    """Bisect intervals, red-refine triangles, or bisect each tensor axis."""
    if mesh.dim == 1:
        a = mesh.axes[0] if mesh.axes is not None else np.sort(mesh.nodes[:, 0])
        fine = _midpoint_refine_axis(a)
        if mesh.kind == "tensor":
            return build_tensor([fine])
        return _interval_mesh(fine)
    if mesh.kind == "tensor":
        return build_tensor([_midpoint_refine_axis(a) for a in mesh.axes])
    # red refinement; edge midpoints numbered after the old nodes
    tri = mesh.elements
    pairs = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
    uniq, inv = np.unique(pairs, axis=0, return_inverse=True)
    inv = inv.ravel()
    E = len(tri)
    N = mesh.num_nodes
    mid = N + inv.reshape(3, E).T  # columns: m01, m12, m20
    new_nodes = np.concatenate([mesh.nodes, 0.5 * (mesh.nodes[uniq[:, 0]] + mesh.nodes[uniq[:, 1]])])
    v0, v1, v2 = tri[:, 0], tri[:, 1], tri[:, 2]
    m01, m12, m20 = mid[:, 0], mid[:, 1], mid[:, 2]
    children = np.stack(
        [
            np.column_stack([v0, m01, m20]),
            np.column_stack([m01, v1, m12]),
            np.column_stack([m20, m12, v2]),
            np.column_stack([m01, m12, m20]),
        ],
        axis=1,
    ).reshape(-1, 3)
    return Mesh(2, "simplicial", new_nodes, children, mesh.lower, mesh.upper)
