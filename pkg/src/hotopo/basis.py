"""Nodal Lagrange bases on uniform reference nodes.

Reference triangle: (0,0), (1,0), (0,1). Reference quadrilateral: [0,1]^2
mapped bilinearly onto the physical corners v0..v3 (CCW).
Nodes are ordered row by row: ``for j in 0..k: for i in ...: (i/k, j/k)``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .mesh import QUAD, TRI


def n_nodes(kind: int, k: int) -> int:
    return (k + 1) * (k + 2) // 2 if kind == TRI else (k + 1) ** 2


def exponents(kind: int, k: int) -> np.ndarray:
    if kind == TRI:
        e = [(a, b) for b in range(k + 1) for a in range(k + 1 - b)]
    else:
        e = [(a, b) for b in range(k + 1) for a in range(k + 1)]
    return np.array(e, dtype=np.int64)


@lru_cache(maxsize=None)
def reference_nodes(kind: int, k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("degree must be >= 1")
    ij = exponents(kind, k)  # same lattice pattern as the monomial exponents
    out = ij.astype(float) / k
    out.setflags(write=False)
    return out


def _monomials(kind: int, k: int, ref: np.ndarray) -> np.ndarray:
    e = exponents(kind, k)
    return ref[:, None, 0] ** e[None, :, 0] * ref[:, None, 1] ** e[None, :, 1]


def _monomial_grads(kind: int, k: int, ref: np.ndarray) -> np.ndarray:
    e = exponents(kind, k)
    x = ref[:, None, 0]
    y = ref[:, None, 1]
    ax, ay = e[None, :, 0], e[None, :, 1]
    dx = np.where(ax > 0, ax * x ** np.maximum(ax - 1, 0), 0.0) * y**ay
    dy = np.where(ay > 0, ay * y ** np.maximum(ay - 1, 0), 0.0) * x**ax
    return np.stack([dx, dy], axis=-1)


@lru_cache(maxsize=None)
def inverse_vandermonde(kind: int, k: int) -> np.ndarray:
    v = _monomials(kind, k, reference_nodes(kind, k))
    out = np.linalg.inv(v)
    out.setflags(write=False)
    return out


def basis_values(kind: int, k: int, ref) -> np.ndarray:
    """``(n_points, n_nodes)`` values of the nodal basis at reference points."""
    ref = np.atleast_2d(np.asarray(ref, dtype=float))
    # einsum rather than BLAS matmul: per-point results must not depend on batch size
    return np.einsum("pm,mn->pn", _monomials(kind, k, ref), inverse_vandermonde(kind, k))


def basis_gradients(kind: int, k: int, ref) -> np.ndarray:
    """``(n_points, n_nodes, 2)`` reference-coordinate gradients."""
    ref = np.atleast_2d(np.asarray(ref, dtype=float))
    g = _monomial_grads(kind, k, ref)
    return np.einsum("pmd,mn->pnd", g, inverse_vandermonde(kind, k))


# -- geometry maps --------------------------------------------------------------


def map_to_physical(kind: int, corners: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Map reference points; ``corners`` is (n, 3|4, 2), ``ref`` is (n, 2)."""
    xi, eta = ref[:, 0:1], ref[:, 1:2]
    if kind == TRI:
        return corners[:, 0] + xi * (corners[:, 1] - corners[:, 0]) + eta * (corners[:, 2] - corners[:, 0])
    return (
        corners[:, 0] * (1 - xi) * (1 - eta)
        + corners[:, 1] * xi * (1 - eta)
        + corners[:, 2] * xi * eta
        + corners[:, 3] * (1 - xi) * eta
    )


def jacobian(kind: int, corners: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """``(n, 2, 2)`` with columns d x/d xi and d x/d eta."""
    if kind == TRI:
        j = np.stack([corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]], axis=-1)
        return j
    xi, eta = ref[:, 0:1], ref[:, 1:2]
    c0, c1, c2, c3 = (corners[:, i] for i in range(4))
    dxi = (c1 - c0) * (1 - eta) + (c2 - c3) * eta
    deta = (c3 - c0) * (1 - xi) + (c2 - c1) * xi
    return np.stack([dxi, deta], axis=-1)


def map_to_reference(kind: int, corners: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Inverse element map. Exact for triangles, Newton for bilinear quads."""
    if kind == TRI:
        j = jacobian(TRI, corners, pts)
        return np.linalg.solve(j, (pts - corners[:, 0])[..., None])[..., 0]
    # affine guess from the (v0, v1, v3) frame, then Newton
    ref = np.linalg.solve(
        np.stack([corners[:, 1] - corners[:, 0], corners[:, 3] - corners[:, 0]], axis=-1),
        (pts - corners[:, 0])[..., None],
    )[..., 0]
    for _ in range(30):
        r = map_to_physical(QUAD, corners, ref) - pts
        step = np.linalg.solve(jacobian(QUAD, corners, ref), r[..., None])[..., 0]
        ref = ref - step
        if np.all(np.abs(step) < 1e-15):
            break
    return ref


# -- quadrature -----------------------------------------------------------------


@lru_cache(maxsize=None)
def reference_quadrature(kind: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre tensor rule with ``n`` points per direction.

    Triangles use the collapsed (Duffy) map ``(u, v) -> (u, v (1 - u))``.
    """
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    u, v, wt = u.ravel(), v.ravel(), (wu * wv).ravel()
    if kind == TRI:
        pts = np.stack([u, v * (1.0 - u)], axis=1)
        wt = wt * (1.0 - u)
    else:
        pts = np.stack([u, v], axis=1)
    pts.setflags(write=False)
    wt.setflags(write=False)
    return pts, wt
