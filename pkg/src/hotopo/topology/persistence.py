"""0-dimensional persistence by union-find over sublevel and superlevel sets."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .complex import TriangulatedField

MIN_SADDLE = "min-saddle"
SADDLE_MAX = "saddle-max"
ESSENTIAL = "essential"


@dataclass(frozen=True)
class PersistencePair:
    birth_vertex: int
    birth_value: float
    death_vertex: int
    death_value: float
    kind: str

    @property
    def persistence(self) -> float:
        return self.death_value - self.birth_value

    @property
    def birth_type(self) -> str:
        return "saddle" if self.kind == SADDLE_MAX else "min"

    @property
    def death_type(self) -> str:
        return "saddle" if self.kind == MIN_SADDLE else "max"

    @property
    def essential(self) -> bool:
        return self.kind == ESSENTIAL


@numba.njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@numba.njit(cache=True)
def merge_sweep(order, rank, indptr, indices, max_degree):
    """Sweep vertices in ``order``; pair each younger root with the merging vertex.

    Component roots are their oldest vertex, so a root is also its birth.
    Returns ``(births, deaths)`` in sweep order of the deaths.
    """
    n = order.size
    parent = np.full(n, -1, np.int64)
    births = np.empty(n, np.int64)
    deaths = np.empty(n, np.int64)
    roots = np.empty(max(max_degree, 1), np.int64)
    npairs = 0
    for v in order:
        parent[v] = v
        nr = 0
        for q in range(indptr[v], indptr[v + 1]):
            u = indices[q]
            if parent[u] < 0:
                continue
            r = _find(parent, u)
            dup = False
            for t in range(nr):
                if roots[t] == r:
                    dup = True
                    break
            if not dup:
                roots[nr] = r
                nr += 1
        if nr == 0:
            continue
        # insertion sort by rank: oldest first, younger merges in birth order
        for a in range(1, nr):
            x = roots[a]
            b = a - 1
            while b >= 0 and rank[roots[b]] > rank[x]:
                roots[b + 1] = roots[b]
                b -= 1
            roots[b + 1] = x
        oldest = roots[0]
        for t in range(1, nr):
            births[npairs] = roots[t]
            deaths[npairs] = v
            npairs += 1
            parent[roots[t]] = oldest
        parent[v] = oldest
    return births[:npairs], deaths[:npairs]


def _sweep_args(tf: TriangulatedField):
    indptr, indices = tf.csr
    return indptr, indices, int(np.diff(indptr).max()) if len(indices) else 1


def sublevel_pairs(tf: TriangulatedField) -> tuple[np.ndarray, np.ndarray]:
    """``(minima, saddles)`` of the ascending sweep."""
    indptr, indices, deg = _sweep_args(tf)
    return merge_sweep(tf.order, tf.rank, indptr, indices, deg)


def superlevel_pairs(tf: TriangulatedField) -> tuple[np.ndarray, np.ndarray]:
    """``(maxima, saddles)`` of the descending sweep."""
    indptr, indices, deg = _sweep_args(tf)
    n = tf.n_vertices
    return merge_sweep(tf.order[::-1].copy(), (n - 1) - tf.rank, indptr, indices, deg)


def persistence_pairs(tf: TriangulatedField) -> list[PersistencePair]:
    """Min-saddle pairs, then saddle-max pairs, then the (min, max) essential pair."""
    vals = tf.values
    out = []
    mins, sads = sublevel_pairs(tf)
    for m, s in zip(mins.tolist(), sads.tolist()):
        out.append(PersistencePair(m, float(vals[m]), s, float(vals[s]), MIN_SADDLE))
    maxs, sads = superlevel_pairs(tf)
    for x, s in zip(maxs.tolist(), sads.tolist()):
        out.append(PersistencePair(s, float(vals[s]), x, float(vals[x]), SADDLE_MAX))
    lo, hi = int(tf.order[0]), int(tf.order[-1])
    out.append(PersistencePair(lo, float(vals[lo]), hi, float(vals[hi]), ESSENTIAL))
    return out


def persistence_values(pairs, include_essential: bool = False) -> np.ndarray:
    return np.array([p.persistence for p in pairs if include_essential or not p.essential], dtype=float)


def persistence_curve(pairs, thresholds=None, include_essential: bool = False):
    """Rows ``(threshold, count_leq, count_gt)``.

    ``count_leq`` counts pairs with persistence at most the threshold;
    ``count_gt`` counts the pairs that remain above it. Default thresholds are
    0 and every distinct persistence value.
    """
    p = np.sort(persistence_values(pairs, include_essential))
    if thresholds is None:
        thresholds = np.unique(np.concatenate([[0.0], p]))
    thresholds = np.asarray(thresholds, dtype=float)
    leq = np.searchsorted(p, thresholds, side="right")
    return [(float(t), int(c), int(len(p) - c)) for t, c in zip(thresholds, leq)]


def count_in_range(pairs, lo: float, hi: float, include_essential: bool = False) -> int:
    """Pairs with ``lo <= p <= hi``."""
    p = persistence_values(pairs, include_essential)
    return int(np.count_nonzero((p >= lo) & (p <= hi)))
