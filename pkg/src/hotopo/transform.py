"""High-order field -> continuous piecewise-linear data, plus vorticity.

Three conversions are provided: point sampling on a grid, uniform
subdivision of the simulation mesh with averaging on shared boundaries, and
L-SIAC filtering sampled on a grid.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from . import basis, siac
from .errors import ConstantField, GridMismatch, MeshMismatch
from .field import HighOrderField
from .mesh import TRI

AUTO_MARGIN = 1e-9


@dataclass
class ScalarGrid:
    """Values on a regular 2D/3D grid, row-major with x fastest."""

    res: tuple[int, ...]
    origin: tuple[float, ...]
    spacing: tuple[float, ...]
    values: np.ndarray
    flags: np.ndarray | None = None  # nodes where L-SIAC fell back to raw data

    def __post_init__(self):
        self.res = tuple(int(r) for r in self.res)
        self.origin = tuple(float(o) for o in self.origin)
        self.spacing = tuple(float(s) for s in self.spacing)
        self.values = np.asarray(self.values, dtype=float).ravel()
        if len(self.res) not in (2, 3) or len(self.origin) != len(self.res) or len(self.spacing) != len(self.res):
            raise ValueError("grid dimension must be 2 or 3 with matching origin/spacing")
        if self.values.size != int(np.prod(self.res)):
            raise ValueError(f"expected {int(np.prod(self.res))} values, got {self.values.size}")
        if any(s <= 0 for s in self.spacing):
            raise ValueError("grid spacing must be positive")
        if self.flags is not None:
            self.flags = np.asarray(self.flags, dtype=bool).ravel()
            if self.flags.size != self.values.size:
                raise ValueError("flags must match the value count")

    @property
    def dim(self) -> int:
        return len(self.res)

    def axes(self) -> list[np.ndarray]:
        return [o + s * np.arange(n) for o, s, n in zip(self.origin, self.spacing, self.res)]

    def positions(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes()[::-1], indexing="ij")[::-1]
        return np.stack([m.ravel() for m in mesh], axis=1)

    def array(self) -> np.ndarray:
        """Values shaped ``(ny, nx)`` or ``(nz, ny, nx)``."""
        return self.values.reshape(self.res[::-1])

    def same_lattice(self, other: "ScalarGrid") -> bool:
        return self.res == other.res and self.origin == other.origin and self.spacing == other.spacing


@dataclass
class PLField:
    """Per-vertex values on a triangle mesh; continuous by construction."""

    vertices: np.ndarray
    triangles: np.ndarray
    values: np.ndarray
    element_of: np.ndarray | None = dc_field(default=None, repr=False)  # source element per triangle

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size != len(self.vertices):
            raise ValueError("one value per vertex required")


def resolve_bbox(field: HighOrderField, bbox="auto") -> tuple[float, float, float, float]:
    if bbox is None or (isinstance(bbox, str) and bbox == "auto"):
        x0, y0, x1, y1 = field.mesh.bbox
        mx, my = AUTO_MARGIN * (x1 - x0), AUTO_MARGIN * (y1 - y0)
        return x0 + mx, y0 + my, x1 - mx, y1 - my
    x0, y0, x1, y1 = (float(v) for v in bbox)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("bbox must satisfy x1 > x0 and y1 > y0")
    return x0, y0, x1, y1


def _grid_frame(res, bbox):
    nx, ny = (int(r) for r in res)
    if nx < 2 or ny < 2:
        raise ValueError("grid resolution must be at least 2 per axis")
    x0, y0, x1, y1 = bbox
    return (nx, ny), (x0, y0), ((x1 - x0) / (nx - 1), (y1 - y0) / (ny - 1))


def thread_count(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("HOTOPO_THREADS")
    return max(1, int(env)) if env else 1


def sample_grid(field: HighOrderField, res, bbox="auto") -> ScalarGrid:
    """Evaluate the field at grid nodes using the owning (lowest-id) element."""
    res, origin, spacing = _grid_frame(res, resolve_bbox(field, bbox))
    grid = ScalarGrid(res, origin, spacing, np.zeros(res[0] * res[1]))
    grid.values = field.evaluate(grid.positions())
    return grid


# -- subdivision ------------------------------------------------------------------


def _lattice(kind: int, m: int):
    if kind == TRI:
        pts = [(i, j) for j in range(m + 1) for i in range(m + 1 - j)]
    else:
        pts = [(i, j) for j in range(m + 1) for i in range(m + 1)]
    index = {p: n for n, p in enumerate(pts)}
    tris = []
    if kind == TRI:
        for j in range(m):
            for i in range(m - j):
                tris.append((index[i, j], index[i + 1, j], index[i, j + 1]))
                if i + j < m - 1:
                    tris.append((index[i + 1, j], index[i + 1, j + 1], index[i, j + 1]))
    else:
        for j in range(m):
            for i in range(m):
                a, b, c, d = index[i, j], index[i + 1, j], index[i + 1, j + 1], index[i, j + 1]
                # diagonal from the lowest local index (a) to the opposite corner
                tris.append((a, b, c))
                tris.append((a, c, d))
    return pts, tris


def _lattice_key(kind: int, m: int, cv: list[int], e: int, i: int, j: int):
    """Topological identity of a lattice point, shared between neighbours."""
    if kind == TRI:
        corners = {(0, 0): cv[0], (m, 0): cv[1], (0, m): cv[2]}
        if (i, j) in corners:
            return ("v", corners[i, j])
        if j == 0:
            a, b, n = cv[0], cv[1], i
        elif i + j == m:
            a, b, n = cv[1], cv[2], j
        elif i == 0:
            a, b, n = cv[0], cv[2], j
        else:
            return ("i", e, i, j)
    else:
        corners = {(0, 0): cv[0], (m, 0): cv[1], (m, m): cv[2], (0, m): cv[3]}
        if (i, j) in corners:
            return ("v", corners[i, j])
        if j == 0:
            a, b, n = cv[0], cv[1], i
        elif i == m:
            a, b, n = cv[1], cv[2], j
        elif j == m:
            a, b, n = cv[3], cv[2], i
        elif i == 0:
            a, b, n = cv[0], cv[3], j
        else:
            return ("i", e, i, j)
    return ("e", a, b, n) if a < b else ("e", b, a, m - n)


def subdivide(field: HighOrderField, m: int | None = None) -> PLField:
    """Split every element uniformly ``m`` times per edge (default ``k + 1``).

    Triangles give ``m^2`` sub-triangles, quadrilaterals ``2 m^2``. Vertices on
    shared edges or mesh vertices take the mean of every adjacent element's
    local value; interior vertices take their element's value.
    """
    mesh = field.mesh
    m = field.degree + 1 if m is None else int(m)
    if m < 1:
        raise ValueError("refinement factor must be >= 1")
    keys: dict = {}
    positions: list = []
    owners: list[list[int]] = []
    tris = []
    tri_elem = []
    lattices = {kind: _lattice(kind, m) for kind in (0, 1)}
    for e in range(mesh.n_elements):
        kind = int(mesh.kinds[e])
        cv = mesh.element_vertices(e).tolist()
        pts, sub = lattices[kind]
        local = []
        for i, j in pts:
            key = _lattice_key(kind, m, cv, e, i, j)
            vid = keys.get(key)
            if vid is None:
                vid = len(positions)
                keys[key] = vid
                if key[0] == "v":
                    positions.append(mesh.vertices[key[1]])
                    owners.append(list(mesh.vertex_elements[key[1]]))
                elif key[0] == "e":
                    _, a, b, n = key
                    positions.append(mesh.vertices[a] + (n / m) * (mesh.vertices[b] - mesh.vertices[a]))
                    owners.append(list(mesh.edge_elements[(a, b)]))
                else:
                    corners = mesh.vertices[cv][None]
                    positions.append(basis.map_to_physical(kind, corners, np.array([[i / m, j / m]]))[0])
                    owners.append([e])
            local.append(vid)
        for t in sub:
            tris.append([local[t[0]], local[t[1]], local[t[2]]])
            tri_elem.append(e)
    pos = np.array(positions)
    vid = np.repeat(np.arange(len(owners)), [len(o) for o in owners])
    elem = np.concatenate([np.asarray(o, dtype=np.int64) for o in owners])
    contrib = field.eval_at(elem, pos[vid])
    total = np.zeros(len(pos))
    np.add.at(total, vid, contrib)
    counts = np.bincount(vid, minlength=len(pos))
    values = total / counts
    single = counts == 1
    # single-owner vertices: plain evaluation, no division round-off
    values[single] = total[single]
    return PLField(pos, np.array(tris, dtype=np.int64), values, np.array(tri_elem, dtype=np.int64))


# -- L-SIAC on a grid ----------------------------------------------------------------


def _fallback_values(field: HighOrderField, pts: np.ndarray, theta: float, deriv: int) -> np.ndarray:
    if deriv == 0:
        return field.evaluate(pts)
    th = np.deg2rad(theta)
    return field.gradient(pts) @ np.array([np.cos(th), np.sin(th)])


def lsiac_grid(
    field: HighOrderField,
    res,
    bbox="auto",
    theta: float = 0.0,
    k: int | None = None,
    order: int | None = None,
    deriv: int = 0,
    H: float | None = None,
    threads: int | None = None,
) -> ScalarGrid:
    """L-SIAC filter sampled on a grid; unfilterable nodes fall back to raw data.

    Axis-aligned filters reuse one line restriction per grid row/column.
    """
    k = field.degree if k is None else int(k)
    order = k + 1 if order is None else int(order)
    res, origin, spacing = _grid_frame(res, resolve_bbox(field, bbox))
    nx, ny = res
    xs = origin[0] + spacing[0] * np.arange(nx)
    ys = origin[1] + spacing[1] * np.arange(ny)
    values = np.empty(nx * ny)
    flags = np.zeros(nx * ny, dtype=bool)
    th = float(theta) % 360.0

    if th in (0.0, 180.0):
        lines = [((xs[0], y), xs - xs[0], slice(j * nx, (j + 1) * nx)) for j, y in enumerate(ys)]
    elif th in (90.0, 270.0):
        lines = [((x, ys[0]), ys - ys[0], slice(i, nx * ny, nx)) for i, x in enumerate(xs)]
    else:
        pts = ScalarGrid(res, origin, spacing, values).positions()
        lines = [(tuple(p), np.zeros(1), slice(n, n + 1)) for n, p in enumerate(pts)]
    if th in (180.0, 270.0):
        lines = [(o, -s, sl) for o, s, sl in lines]

    def work(item):
        o, s, _ = item
        return siac.lsiac_line(field, o, th, s, k, order, deriv, H)

    n_threads = thread_count(threads)
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(work, lines))
    else:
        results = [work(item) for item in lines]
    for (_, _, sl), (v, f) in zip(lines, results):
        values[sl] = v
        flags[sl] = f
    grid = ScalarGrid(res, origin, spacing, values, flags)
    if flags.any():
        pts = grid.positions()[flags]
        values[flags] = _fallback_values(field, pts, th, deriv)
    grid.values = values
    return grid


# -- vorticity ------------------------------------------------------------------


def vorticity_grid_fd(u: ScalarGrid, v: ScalarGrid) -> ScalarGrid:
    """``v_x - u_y`` with 2nd-order central/one-sided finite differences."""
    if not u.same_lattice(v):
        raise GridMismatch("u and v grids differ in resolution, origin or spacing")
    if u.dim != 2:
        raise GridMismatch("finite-difference vorticity needs 2D grids")
    if min(u.res) < 3:
        raise GridMismatch("second-order stencils need at least 3 nodes per axis")
    dx, dy = u.spacing
    vx = np.gradient(v.array(), dx, axis=1, edge_order=2)
    uy = np.gradient(u.array(), dy, axis=0, edge_order=2)
    flags = None
    if u.flags is not None or v.flags is not None:
        flags = np.zeros(u.values.size, bool)
        for g in (u, v):
            if g.flags is not None:
                flags |= g.flags
    return ScalarGrid(u.res, u.origin, u.spacing, (vx - uy).ravel(), flags)


def pl_gradients(pl: PLField) -> np.ndarray:
    """Area-weighted vertex average of the per-triangle constant gradients."""
    p = pl.vertices[pl.triangles]
    f = pl.values[pl.triangles]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    jac = np.stack([e1, e2], axis=1)  # rows are edge vectors
    rhs = np.stack([f[:, 1] - f[:, 0], f[:, 2] - f[:, 0]], axis=1)
    grad = np.linalg.solve(jac, rhs[..., None])[..., 0]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    acc = np.zeros((len(pl.vertices), 2))
    wsum = np.zeros(len(pl.vertices))
    for c in range(3):
        np.add.at(acc, pl.triangles[:, c], grad * area[:, None])
        np.add.at(wsum, pl.triangles[:, c], area)
    return acc / wsum[:, None]


def vorticity_subdivided(u: PLField, v: PLField) -> PLField:
    if not (np.array_equal(u.triangles, v.triangles) and np.array_equal(u.vertices, v.vertices)):
        raise MeshMismatch("u and v live on different simplicial meshes")
    gu, gv = pl_gradients(u), pl_gradients(v)
    return PLField(u.vertices, u.triangles, gv[:, 0] - gu[:, 1], u.element_of)


def vorticity_lsiac(
    u_field: HighOrderField,
    v_field: HighOrderField,
    res,
    bbox="auto",
    k: int | None = None,
    order: int | None = None,
    H: float | None = None,
    threads: int | None = None,
) -> ScalarGrid:
    """``v_x - u_y`` from derivative L-SIAC filters along x (for v) and y (for u)."""
    if u_field.mesh is not v_field.mesh and not (
        np.array_equal(u_field.mesh.vertices, v_field.mesh.vertices)
        and np.array_equal(u_field.mesh.conn, v_field.mesh.conn)
    ):
        raise MeshMismatch("u and v fields are defined on different meshes")
    uy = lsiac_grid(u_field, res, bbox, 90.0, k, order, 1, H, threads)
    vx = lsiac_grid(v_field, res, bbox, 0.0, k, order, 1, H, threads)
    flags = uy.flags | vx.flags
    return ScalarGrid(uy.res, uy.origin, uy.spacing, vx.values - uy.values, flags)


def normalize(g):
    """Affine rescale of the values to [0, 1]; flags and geometry are kept."""
    lo, hi = float(np.min(g.values)), float(np.max(g.values))
    if not hi > lo:
        raise ConstantField("cannot normalise a constant field")
    return replace(g, values=(g.values - lo) / (hi - lo))
