"""Unstructured 2D meshes of straight-sided triangles and quadrilaterals."""

from __future__ import annotations

from collections import defaultdict
from functools import cached_property

import numpy as np

from .errors import MeshError, PointOutsideMesh

TRI, QUAD = 0, 1
KIND_NAMES = {TRI: "tri", QUAD: "quad"}
KIND_CODES = {"tri": TRI, "triangle": TRI, "quad": QUAD, "quadrilateral": QUAD}

# barycentric containment tolerance
BARY_TOL = 1e-12


def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


class Mesh:
    """Vertices plus triangle/quad elements listed counter-clockwise.

    ``conn`` is an ``(n_elements, 4)`` integer array; triangles carry ``-1``
    in the last column. Construction validates the invariants (valid indices,
    positive signed area, each edge shared by at most two elements).
    """

    def __init__(self, vertices, elements):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must have shape (n, 2)")
        kinds, conn = [], []
        for kind, verts in elements:
            code = KIND_CODES.get(kind, kind)
            if code not in (TRI, QUAD):
                raise MeshError(f"unknown element kind {kind!r}")
            verts = [int(v) for v in verts]
            if len(verts) != (3 if code == TRI else 4):
                raise MeshError(f"element of kind {KIND_NAMES[code]} needs {3 + code} vertices")
            kinds.append(code)
            conn.append(verts + [-1] * (4 - len(verts)))
        if not kinds:
            raise MeshError("mesh has no elements")
        self.kinds = np.array(kinds, dtype=np.int64)
        self.conn = np.array(conn, dtype=np.int64)
        self._validate()

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_arrays(cls, vertices, triangles=(), quads=()):
        elements = [("tri", t) for t in triangles] + [("quad", q) for q in quads]
        return cls(vertices, elements)

    def element_vertices(self, e: int) -> np.ndarray:
        n = 3 if self.kinds[e] == TRI else 4
        return self.conn[e, :n]

    def element_polygon(self, e: int) -> np.ndarray:
        return self.vertices[self.element_vertices(e)]

    def elements(self):
        """Yield ``(kind_name, vertex_ids)`` like the constructor input."""
        for e in range(self.n_elements):
            yield KIND_NAMES[int(self.kinds[e])], self.element_vertices(e).tolist()

    @property
    def n_elements(self) -> int:
        return len(self.kinds)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def _validate(self):
        nv = self.n_vertices
        for e in range(self.n_elements):
            ids = self.element_vertices(e)
            if ids.min() < 0 or ids.max() >= nv:
                raise MeshError(f"element {e} references a missing vertex")
            if len(set(ids.tolist())) != len(ids):
                raise MeshError(f"element {e} repeats a vertex")
            poly = self.vertices[ids]
            if _signed_area(poly) <= 0.0:
                raise MeshError(f"element {e} has non-positive signed area (must be CCW)")
            if len(ids) == 4:
                # convexity: every corner turns left
                d = np.roll(poly, -1, axis=0) - poly
                cross = d[:, 0] * np.roll(d, -1, axis=0)[:, 1] - d[:, 1] * np.roll(d, -1, axis=0)[:, 0]
                if np.any(cross <= 0.0):
                    raise MeshError(f"quadrilateral {e} is not strictly convex")
        for edge, elems in self.edge_elements.items():
            if len(elems) > 2:
                raise MeshError(f"edge {edge} is shared by {len(elems)} elements")

    # -- adjacency ------------------------------------------------------------

    @cached_property
    def edge_elements(self) -> dict[tuple[int, int], list[int]]:
        """Sorted vertex pair -> adjacent element ids (ascending)."""
        out = defaultdict(list)
        for e in range(self.n_elements):
            ids = self.element_vertices(e).tolist()
            for a, b in zip(ids, ids[1:] + ids[:1]):
                out[(min(a, b), max(a, b))].append(e)
        return dict(out)

    @cached_property
    def vertex_elements(self) -> list[list[int]]:
        out = [[] for _ in range(self.n_vertices)]
        for e in range(self.n_elements):
            for v in self.element_vertices(e):
                out[int(v)].append(e)
        return out

    @cached_property
    def interior_edges(self) -> list[tuple[int, int]]:
        return sorted(k for k, v in self.edge_elements.items() if len(v) == 2)

    @cached_property
    def boundary_edges(self) -> list[tuple[int, int]]:
        return sorted(k for k, v in self.edge_elements.items() if len(v) == 1)

    @cached_property
    def longest_edge(self) -> np.ndarray:
        """Longest edge length per element (the element size h)."""
        out = np.empty(self.n_elements)
        for e in range(self.n_elements):
            poly = self.element_polygon(e)
            out[e] = np.max(np.linalg.norm(np.roll(poly, -1, axis=0) - poly, axis=1))
        return out

    @cached_property
    def bbox(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def centroid(self, e: int) -> np.ndarray:
        return self.element_polygon(e).mean(axis=0)

    # -- point location -------------------------------------------------------

    @cached_property
    def _subtriangles(self):
        """Per element two triangles (v0,v1,v2),(v0,v2,v3); triangles repeat."""
        c = self.conn.copy()
        tri = self.kinds == TRI
        c[tri, 3] = c[tri, 2]
        a = self.vertices[c[:, [0, 1, 2]]]
        b = self.vertices[c[:, [0, 2, 3]]]
        return np.stack([a, b], axis=1)  # (ne, 2, 3, 2)

    @cached_property
    def _sub_inverse(self):
        t = self._subtriangles
        j = np.stack([t[:, :, 1] - t[:, :, 0], t[:, :, 2] - t[:, :, 0]], axis=-1)  # (ne,2,2,2)
        tri = self.kinds == TRI
        # duplicated triangle for TRI elements has no area in the second slot
        j[tri, 1] = j[tri, 0]
        return np.linalg.inv(j)

    def _contains(self, elems: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Vectorised closure test of ``pts[i]`` against ``elems[i]``."""
        t = self._subtriangles[elems]  # (n,2,3,2)
        jinv = self._sub_inverse[elems]  # (n,2,2,2)
        d = pts[:, None, :] - t[:, :, 0]
        lam = np.einsum("nsij,nsj->nsi", jinv, d)
        l0 = 1.0 - lam.sum(axis=-1)
        ok = (lam[..., 0] >= -BARY_TOL) & (lam[..., 1] >= -BARY_TOL) & (l0 >= -BARY_TOL)
        return ok.any(axis=1)

    @cached_property
    def _buckets(self):
        x0, y0, x1, y1 = self.bbox
        nb = max(1, int(np.ceil(np.sqrt(self.n_elements))))
        sx = (x1 - x0) / nb or 1.0
        sy = (y1 - y0) / nb or 1.0
        cells = [[] for _ in range(nb * nb)]
        pad = 1e-9 * max(x1 - x0, y1 - y0, 1.0)
        for e in range(self.n_elements):
            poly = self.element_polygon(e)
            lo = poly.min(axis=0) - pad
            hi = poly.max(axis=0) + pad
            i0 = int(np.clip((lo[0] - x0) // sx, 0, nb - 1))
            i1 = int(np.clip((hi[0] - x0) // sx, 0, nb - 1))
            j0 = int(np.clip((lo[1] - y0) // sy, 0, nb - 1))
            j1 = int(np.clip((hi[1] - y0) // sy, 0, nb - 1))
            for j in range(j0, j1 + 1):
                for i in range(i0, i1 + 1):
                    cells[j * nb + i].append(e)
        width = max(len(c) for c in cells)
        table = np.full((nb * nb, width), -1, dtype=np.int64)
        for c, lst in enumerate(cells):
            table[c, : len(lst)] = lst  # ascending by construction
        return (x0, y0, sx, sy, nb), table

    def locate_points(self, pts, *, strict: bool = True) -> np.ndarray:
        """Element id for every point; lowest id wins on shared edges/vertices.

        With ``strict=False`` points outside the mesh get ``-1`` instead of
        raising :class:`PointOutsideMesh`.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        (x0, y0, sx, sy, nb), table = self._buckets
        i = np.clip(np.floor((pts[:, 0] - x0) / sx), 0, nb - 1).astype(np.int64)
        j = np.clip(np.floor((pts[:, 1] - y0) / sy), 0, nb - 1).astype(np.int64)
        cand = table[j * nb + i]
        out = np.full(len(pts), -1, dtype=np.int64)
        todo = np.arange(len(pts))
        for r in range(table.shape[1]):
            if len(todo) == 0:
                break
            e = cand[todo, r]
            valid = e >= 0
            todo, e = todo[valid], e[valid]
            hit = self._contains(e, pts[todo])
            out[todo[hit]] = e[hit]
            todo = todo[~hit]
        if strict and np.any(out < 0):
            bad = pts[np.argmax(out < 0)]
            raise PointOutsideMesh(f"point ({bad[0]!r}, {bad[1]!r}) is outside the mesh")
        return out

    def locate_element(self, p) -> int:
        return int(self.locate_points(np.asarray(p, dtype=float)[None, :])[0])

    def elements_containing(self, p) -> list[int]:
        """All elements whose closure contains ``p`` (ascending)."""
        p = np.asarray(p, dtype=float)
        e = np.arange(self.n_elements)
        hit = self._contains(e, np.broadcast_to(p, (len(e), 2)))
        return e[hit].tolist()
