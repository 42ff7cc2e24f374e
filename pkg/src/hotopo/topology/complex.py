"""Simplicial complexes with a vertex scalar and a strict (value, index) order."""

from __future__ import annotations

from functools import cached_property
from itertools import combinations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..errors import DegenerateGrid, MeshError


class TriangulatedField:
    """Triangles (2D) or tetrahedra (3D) plus one value per vertex.

    Ties in value are broken by vertex index, so every algorithm here only
    consumes the strict order ``rank``.
    """

    def __init__(self, points, simplices, values, *, check: bool = True):
        self.points = np.asarray(points, dtype=float)
        self.simplices = np.asarray(simplices, dtype=np.int64)
        self.values = np.ascontiguousarray(values, dtype=float).ravel()
        n = len(self.values)
        if self.simplices.ndim != 2 or self.simplices.shape[1] not in (3, 4):
            raise MeshError("simplices must be an (m, 3) or (m, 4) array")
        if len(self.points) != n:
            raise MeshError("one value per vertex required")
        if check:
            if self.simplices.size and (self.simplices.min() < 0 or self.simplices.max() >= n):
                raise MeshError("simplex references an unknown vertex")
            if not np.all(np.isfinite(self.values)):
                raise MeshError("field values must be finite")
            if np.any(np.bincount(self.simplices.ravel(), minlength=n) == 0):
                raise MeshError("every vertex needs at least one incident simplex")
            ncomp = connected_components(self.adjacency_matrix(), directed=False)[0]
            if ncomp != 1:
                raise MeshError(f"complex has {ncomp} connected components; expected 1")

    @property
    def n_vertices(self) -> int:
        return len(self.values)

    @property
    def dim(self) -> int:
        return self.simplices.shape[1] - 1

    @cached_property
    def order(self) -> np.ndarray:
        """Vertices sorted by ``(value, index)``."""
        return np.lexsort((np.arange(self.n_vertices), self.values))

    @cached_property
    def rank(self) -> np.ndarray:
        r = np.empty(self.n_vertices, dtype=np.int64)
        r[self.order] = np.arange(self.n_vertices)
        return r

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges ``(a, b)`` with ``a < b``, sorted."""
        s = self.simplices
        pairs = np.concatenate([s[:, [i, j]] for i, j in combinations(range(s.shape[1]), 2)])
        pairs.sort(axis=1)
        n = self.n_vertices
        keys = np.unique(pairs[:, 0] * n + pairs[:, 1])
        return np.stack([keys // n, keys % n], axis=1)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(indptr, indices)``; neighbours of each vertex in ascending id."""
        e = self.edges
        n = self.n_vertices
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        idx = np.lexsort((dst, src))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return indptr, np.ascontiguousarray(dst[idx])

    def adjacency_matrix(self):
        e = self.edges
        n = self.n_vertices
        data = np.ones(len(e), dtype=np.int8)
        return coo_matrix((data, (e[:, 0], e[:, 1])), shape=(n, n)).tocsr()

    def with_values(self, values) -> "TriangulatedField":
        """Same complex, new scalar; cached connectivity is shared."""
        out = TriangulatedField.__new__(TriangulatedField)
        out.points = self.points
        out.simplices = self.simplices
        out.values = np.ascontiguousarray(values, dtype=float).ravel()
        if out.values.size != self.n_vertices:
            raise ValueError("one value per vertex required")
        for name in ("edges", "csr"):
            if name in self.__dict__:
                out.__dict__[name] = self.__dict__[name]
        return out


def grid_simplices(res) -> np.ndarray:
    """Freudenthal split of a regular grid; vertex id is x-fastest row-major."""
    res = tuple(int(r) for r in res)
    if len(res) not in (2, 3) or min(res) < 2:
        raise DegenerateGrid(f"grid resolution {res} needs at least 2 nodes per axis")
    if len(res) == 2:
        nx, ny = res
        i, j = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1))
        v00 = (j * nx + i).ravel()
        v10, v01, v11 = v00 + 1, v00 + nx, v00 + nx + 1
        tris = np.stack([np.stack([v00, v10, v11], 1), np.stack([v00, v11, v01], 1)], axis=1)
        return tris.reshape(-1, 3)
    nx, ny, nz = res
    k, j, i = np.meshgrid(np.arange(nz - 1), np.arange(ny - 1), np.arange(nx - 1), indexing="ij")
    base = (k * nx * ny + j * nx + i).ravel()
    step = np.array([1, nx, nx * ny])
    tets = []
    # one tet per axis permutation; all share the main diagonal
    for perm in ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
        a = base
        b = a + step[perm[0]]
        c = b + step[perm[1]]
        d = c + step[perm[2]]
        tets.append(np.stack([a, b, c, d], 1))
    return np.stack(tets, axis=1).reshape(-1, 4)


def triangulate_grid(grid) -> TriangulatedField:
    """Implicit-style simplicial complex over a :class:`~hotopo.transform.ScalarGrid`."""
    simplices = grid_simplices(grid.res)
    return TriangulatedField(grid.positions(), simplices, grid.values, check=False)


def from_pl(pl) -> TriangulatedField:
    return TriangulatedField(pl.vertices, pl.triangles, pl.values)
