"""Persistence-driven simplification by monotone flooding from kept extrema."""

from __future__ import annotations

import heapq

import numba
import numpy as np

from ..errors import ConvergenceFailure
from .complex import TriangulatedField
from .persistence import persistence_pairs


@numba.njit(cache=True)
def flood(values, rank, tiekey, seeds, indptr, indices):
    """Prim-style sweep from ``seeds`` in ``rank`` order.

    Every popped vertex is lifted so that ``(value, tiekey)`` increases
    strictly along the sweep; basins not containing a seed get filled up to
    the level where the sweep reaches them.
    """
    n = values.size
    g = values.copy()
    seen = np.zeros(n, np.bool_)
    heap = [(rank[seeds[0]], seeds[0])]
    for s in seeds[1:]:
        heapq.heappush(heap, (rank[s], s))
    last = -1
    level = 0.0
    while len(heap) > 0:
        _, v = heapq.heappop(heap)
        if seen[v]:
            continue
        seen[v] = True
        if last >= 0:
            if g[v] < level or (g[v] == level and tiekey[v] < tiekey[last]):
                if tiekey[v] > tiekey[last]:
                    g[v] = level
                else:
                    g[v] = np.nextafter(level, np.inf)
        last = v
        level = g[v]
        for q in range(indptr[v], indptr[v + 1]):
            u = indices[q]
            if not seen[u]:
                heapq.heappush(heap, (rank[u], u))
    return g


def _fill_minima(tf: TriangulatedField, keep: np.ndarray) -> np.ndarray:
    indptr, indices = tf.csr
    ids = np.arange(tf.n_vertices, dtype=np.int64)
    return flood(tf.values, tf.rank, ids, keep, indptr, indices)


def _fill_maxima(tf: TriangulatedField, keep: np.ndarray) -> np.ndarray:
    indptr, indices = tf.csr
    n = tf.n_vertices
    ids = -np.arange(n, dtype=np.int64)
    return -flood(-tf.values, (n - 1) - tf.rank, ids, keep, indptr, indices)


def extremum_sets(tf: TriangulatedField) -> tuple[np.ndarray, np.ndarray]:
    """``(minima, maxima)``: vertices with an empty lower / upper link."""
    indptr, indices = tf.csr
    n = tf.n_vertices
    owner = np.repeat(np.arange(n), np.diff(indptr))
    lower = tf.rank[indices] < tf.rank[owner]
    n_lower = np.bincount(owner, weights=lower, minlength=n)
    return np.nonzero(n_lower == 0)[0], np.nonzero(n_lower == np.diff(indptr))[0]


def kept_extrema(tf: TriangulatedField, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Extrema whose pair outlives ``eps``, plus the global minimum and maximum."""
    mins, maxs = [int(tf.order[0])], [int(tf.order[-1])]
    for p in persistence_pairs(tf):
        if p.essential or p.persistence <= eps:
            continue
        if p.kind == "min-saddle":
            mins.append(p.birth_vertex)
        else:
            maxs.append(p.death_vertex)
    return np.unique(np.array(mins, np.int64)), np.unique(np.array(maxs, np.int64))


def simplify(tf: TriangulatedField, eps: float) -> TriangulatedField:
    """Cancel every non-essential pair with persistence ``<= eps``.

    The extrema to keep are fixed from ``tf`` up front. Sublevel fills seeded
    at the kept minima alternate with superlevel fills seeded at the kept
    maxima until those are the only extrema left.
    """
    if not eps >= 0.0:
        raise ValueError("epsilon must be >= 0")
    keep_min, keep_max = kept_extrema(tf, eps)
    cap = len(persistence_pairs(tf)) + 1
    g = tf
    for _ in range(cap):
        mins, maxs = extremum_sets(g)
        if np.array_equal(mins, keep_min) and np.array_equal(maxs, keep_max):
            return g
        g = g.with_values(_fill_minima(g, keep_min))
        g = g.with_values(_fill_maxima(g, keep_max))
    mins, maxs = extremum_sets(g)
    if np.array_equal(mins, keep_min) and np.array_equal(maxs, keep_max):
        return g
    raise ConvergenceFailure(f"extra extrema survive {cap} simplification sweeps at epsilon {eps}")
