"""Seeded test meshes standing in for simulation meshes."""

from __future__ import annotations

import numpy as np

from .errors import InvalidSpec
from .mesh import Mesh


def make_demo_mesh(
    nx: int,
    ny: int,
    *,
    jitter: float = 0.0,
    seed: int = 0,
    tri: bool = True,
    bbox: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0),
) -> Mesh:
    """Structured ``nx`` x ``ny`` cell mesh of a rectangle.

    Interior vertices are displaced uniformly by up to ``jitter`` times the
    cell spacing. With ``tri`` each cell is split in two; for ``jitter > 0``
    the diagonal direction is drawn per cell so the result looks unstructured.
    """
    if nx < 1 or ny < 1:
        raise InvalidSpec("grid must have at least one cell per axis")
    if not 0.0 <= jitter < 0.3:
        raise InvalidSpec("jitter must lie in [0, 0.3) to keep elements valid")
    x0, y0, x1, y1 = bbox
    if not (x1 > x0 and y1 > y0):
        raise InvalidSpec("empty bounding box")
    rng = np.random.default_rng(seed)
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
    xs = x0 + hx * np.arange(nx + 1)
    ys = y0 + hy * np.arange(ny + 1)
    gx, gy = np.meshgrid(xs, ys)  # (ny+1, nx+1), x fastest
    verts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    if jitter > 0.0:
        d = rng.uniform(-jitter, jitter, size=verts.shape) * np.array([hx, hy])
        interior = np.zeros((ny + 1, nx + 1), dtype=bool)
        interior[1:-1, 1:-1] = True
        verts[interior.ravel()] += d[interior.ravel()]
    flips = rng.integers(0, 2, size=nx * ny).astype(bool) if (tri and jitter > 0.0) else np.zeros(nx * ny, bool)

    def vid(i, j):
        return j * (nx + 1) + i

    elements = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if not tri:
                elements.append(("quad", [a, b, c, d]))
            elif flips[j * nx + i]:
                elements.append(("tri", [a, b, d]))
                elements.append(("tri", [b, c, d]))
            else:
                elements.append(("tri", [a, b, c]))
                elements.append(("tri", [a, c, d]))
    return Mesh(verts, elements)
