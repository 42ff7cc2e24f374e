"""Vertex classification from lower/upper link components."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .complex import TriangulatedField


@dataclass(frozen=True)
class CriticalPoint:
    vertex: int
    value: float
    type: str  # minimum | saddle | maximum (3D: 1-saddle | 2-saddle)
    index: int
    multiplicity: int = 1


def link_components(tf: TriangulatedField) -> tuple[np.ndarray, np.ndarray]:
    """Number of lower and upper link components per vertex."""
    indptr, indices = tf.csr
    n = tf.n_vertices
    rank = tf.rank
    owner = np.repeat(np.arange(n), np.diff(indptr))
    nnz = len(indices)
    keys = owner * n + indices  # sorted: CSR rows ascending, columns ascending
    lower = rank[indices] < rank[owner]

    s = tf.simplices
    src, dst = [], []
    for v_col in range(s.shape[1]):
        others = [c for c in range(s.shape[1]) if c != v_col]
        v = s[:, v_col]
        for ca, cb in combinations(others, 2):
            a, b = s[:, ca], s[:, cb]
            pa = np.searchsorted(keys, v * n + a)
            pb = np.searchsorted(keys, v * n + b)
            same = lower[pa] == lower[pb]
            src.append(pa[same])
            dst.append(pb[same])
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    graph = coo_matrix((np.ones(len(src), np.int8), (src, dst)), shape=(nnz, nnz))
    _, label = connected_components(graph, directed=False)

    def count(mask):
        combo = np.unique(owner[mask] * nnz + label[mask])
        return np.bincount(combo // nnz, minlength=n)

    return count(lower), count(~lower)


def classify_critical_points(tf: TriangulatedField) -> list[CriticalPoint]:
    """Minima, maxima and saddles in vertex-id order.

    A saddle whose link splits into ``lam`` lower (or upper) pieces carries
    multiplicity ``lam - 1``.
    """
    lo, up = link_components(tf)
    d = tf.dim
    out: list[CriticalPoint] = []
    vals = tf.values
    for v in np.nonzero((lo != 1) | (up != 1))[0]:
        v = int(v)
        val = float(vals[v])
        if lo[v] == 0:
            out.append(CriticalPoint(v, val, "minimum", 0))
        elif up[v] == 0:
            out.append(CriticalPoint(v, val, "maximum", d))
        elif d == 2:
            out.append(CriticalPoint(v, val, "saddle", 1, int(max(lo[v], up[v]) - 1)))
        else:
            if lo[v] >= 2:
                out.append(CriticalPoint(v, val, "1-saddle", 1, int(lo[v] - 1)))
            if up[v] >= 2:
                out.append(CriticalPoint(v, val, "2-saddle", 2, int(up[v] - 1)))
    return out
