"""Contour tree from join and split trees, and the arc segmentation."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numba
import numpy as np

from ..errors import NotSimplyConnected
from .complex import TriangulatedField
from .persistence import _find


@numba.njit(cache=True)
def merge_tree(order, indptr, indices):
    """Augmented merge tree of the sweep in ``order``.

    ``nxt[v]`` is the arc leaving ``v`` in sweep direction (-1 at the root),
    ``cnt[v]``/``acc[v]`` count and sum the arcs arriving at ``v``.
    """
    n = order.size
    parent = np.full(n, -1, np.int64)
    latest = np.empty(n, np.int64)
    nxt = np.full(n, -1, np.int64)
    cnt = np.zeros(n, np.int64)
    acc = np.zeros(n, np.int64)
    for v in order:
        parent[v] = v
        latest[v] = v
        for q in range(indptr[v], indptr[v + 1]):
            u = indices[q]
            if parent[u] < 0:
                continue
            ru = _find(parent, u)
            if ru != v:
                w = latest[ru]
                nxt[w] = v
                cnt[v] += 1
                acc[v] += w
                parent[ru] = v
        latest[v] = v
    return nxt, cnt, acc


@numba.njit(cache=True)
def merge_join_split(order, jt_up, jt_dc, jt_ds, st_dn, st_uc, st_us):
    """Leaf pruning; returns the contour-tree edges or fewer than n-1 on failure."""
    n = order.size
    queue = np.empty(n, np.int64)
    queued = np.zeros(n, np.bool_)
    head = 0
    tail = 0
    for v in order:
        if (jt_dc[v] == 0 and st_uc[v] == 1) or (st_uc[v] == 0 and jt_dc[v] == 1):
            queue[tail] = v
            tail += 1
            queued[v] = True
    ea = np.empty(max(n - 1, 0), np.int64)
    eb = np.empty(max(n - 1, 0), np.int64)
    ne = 0
    while head < tail and ne < n - 1:
        v = queue[head]
        head += 1
        if st_uc[v] == 0 and jt_dc[v] == 1:
            # upper leaf: its arc is the split-tree arc below it
            w = st_dn[v]
            st_uc[w] -= 1
            st_us[w] -= v
            c = jt_ds[v]
            u = jt_up[v]
            jt_up[c] = u
            if u >= 0:
                jt_ds[u] += c - v
        elif jt_dc[v] == 0 and st_uc[v] == 1:
            w = jt_up[v]
            jt_dc[w] -= 1
            jt_ds[w] -= v
            c = st_us[v]
            d = st_dn[v]
            st_dn[c] = d
            if d >= 0:
                st_us[d] += c - v
        else:
            continue
        ea[ne] = min(v, w)
        eb[ne] = max(v, w)
        ne += 1
        jt_dc[v] = -1
        st_uc[v] = -1
        if not queued[w] and ((jt_dc[w] == 0 and st_uc[w] == 1) or (st_uc[w] == 0 and jt_dc[w] == 1)):
            queue[tail] = w
            tail += 1
            queued[w] = True
    return ea[:ne], eb[:ne]


@numba.njit(cache=True)
def trace_arcs(order, rank, t_ptr, t_idx, degree):
    """Label regular vertices with the arc they lie on; arcs are walked upwards."""
    n = order.size
    label = np.full(n, -1, np.int64)
    lo = np.empty(n, np.int64)
    hi = np.empty(n, np.int64)
    na = 0
    for s in order:
        if degree[s] == 2:
            continue
        for q in range(t_ptr[s], t_ptr[s + 1]):
            x = t_idx[q]
            if rank[x] < rank[s]:
                continue
            prev = s
            cur = x
            while degree[cur] == 2:
                label[cur] = na
                a = t_idx[t_ptr[cur]]
                b = t_idx[t_ptr[cur] + 1]
                nx = b if a == prev else a
                prev = cur
                cur = nx
            lo[na] = s
            hi[na] = cur
            na += 1
    return label, lo[:na], hi[:na]


@dataclass
class ContourTree:
    nodes: np.ndarray  # vertex ids of supernodes, ascending (value, index)
    arc_lo: np.ndarray  # lower end vertex of each arc
    arc_hi: np.ndarray
    arc_label: np.ndarray  # per-vertex arc id (-1 on supernodes until segmentation)
    node_degree: np.ndarray  # per supernode
    values: np.ndarray

    @property
    def n_arcs(self) -> int:
        return len(self.arc_lo)

    def leaves(self) -> np.ndarray:
        return self.nodes[self.node_degree == 1]

    def node_type(self, v: int) -> str:
        deg = self.node_degree[np.searchsorted(self.nodes, v, sorter=self._node_sorter)]
        if deg == 1:
            up = np.count_nonzero(self.arc_lo == v)
            return "min" if up else "max"
        return "saddle"

    @property
    def _node_sorter(self):
        return np.argsort(self.nodes, kind="stable")

    def incident_arcs(self, v: int) -> np.ndarray:
        return np.nonzero((self.arc_lo == v) | (self.arc_hi == v))[0]


def contour_tree(tf: TriangulatedField) -> ContourTree:
    """Join/split merge with degree-2 suppression."""
    indptr, indices = tf.csr
    n = tf.n_vertices
    if tf.dim == 2:
        chi = n - len(tf.edges) + len(tf.simplices)
        if chi not in (1, 2):
            raise NotSimplyConnected(f"surface has Euler characteristic {chi}; contour tree needs a disk or sphere")
    order = tf.order
    jt_up, jt_dc, jt_ds = merge_tree(order, indptr, indices)
    st_dn, st_uc, st_us = merge_tree(order[::-1].copy(), indptr, indices)
    ea, eb = merge_join_split(order, jt_up, jt_dc, jt_ds, st_dn, st_uc, st_us)
    if len(ea) != n - 1:
        raise NotSimplyConnected(
            f"join/split merge consumed {len(ea) + 1} of {n} vertices; domain is not simply connected"
        )
    src = np.concatenate([ea, eb])
    dst = np.concatenate([eb, ea])
    degree = np.bincount(src, minlength=n)
    rank = tf.rank
    srt = np.lexsort((rank[dst], src))
    t_ptr = np.zeros(n + 1, np.int64)
    np.cumsum(degree, out=t_ptr[1:])
    t_idx = np.ascontiguousarray(dst[srt])
    label, lo, hi = trace_arcs(order, rank, t_ptr, t_idx, degree)
    nodes = order[degree[order] != 2]
    return ContourTree(nodes, lo, hi, label, degree[nodes], tf.values)


@dataclass
class Segment:
    id: int
    size: int
    is_leaf: bool
    extremum_vertex: int | None
    extremum_value: float | None
    depth: int
    lo: int
    hi: int


@dataclass
class Segmentation:
    labels: np.ndarray
    segments: list[Segment]

    def leaf_segments(self, min_size: int = 1) -> list[Segment]:
        return [s for s in self.segments if s.is_leaf and s.size >= min_size]


def _arc_depths(tree: ContourTree) -> np.ndarray:
    """Arc-graph distance of every arc to the nearest leaf arc."""
    na = tree.n_arcs
    by_node: dict[int, list[int]] = {}
    for a in range(na):
        by_node.setdefault(int(tree.arc_lo[a]), []).append(a)
        by_node.setdefault(int(tree.arc_hi[a]), []).append(a)
    leaf_nodes = set(tree.leaves().tolist())
    depth = np.full(na, -1, np.int64)
    q = deque()
    for a in range(na):
        if int(tree.arc_lo[a]) in leaf_nodes or int(tree.arc_hi[a]) in leaf_nodes:
            depth[a] = 0
            q.append(a)
    while q:
        a = q.popleft()
        for v in (int(tree.arc_lo[a]), int(tree.arc_hi[a])):
            for b in by_node[v]:
                if depth[b] < 0:
                    depth[b] = depth[a] + 1
                    q.append(b)
    return depth


def segmentation(tree: ContourTree, tf: TriangulatedField) -> Segmentation:
    """Per-vertex arc labels plus segment metadata.

    A supernode joins the arc it shares with the regular vertices around it:
    leaves take their only arc, a saddle with a single arc below takes that
    one, one with a single arc above takes that one, anything else its
    lowest-numbered arc.
    """
    labels = tree.arc_label.copy()
    leaf_nodes = set(tree.leaves().tolist())
    for v in tree.nodes.tolist():
        inc = tree.incident_arcs(v)
        if len(inc) == 0:
            labels[v] = 0  # single-vertex complex
            continue
        below = inc[tree.arc_hi[inc] == v]
        above = inc[tree.arc_lo[inc] == v]
        if len(inc) == 1:
            labels[v] = inc[0]
        elif len(below) == 1:
            labels[v] = below[0]
        elif len(above) == 1:
            labels[v] = above[0]
        else:
            labels[v] = inc.min()
    na = max(tree.n_arcs, 1)
    sizes = np.bincount(labels, minlength=na)
    depth = _arc_depths(tree) if tree.n_arcs else np.zeros(1, np.int64)
    segs = []
    for a in range(na):
        if tree.n_arcs == 0:
            segs.append(Segment(0, int(sizes[0]), True, None, None, 0, int(tree.nodes[0]), int(tree.nodes[0])))
            continue
        lo, hi = int(tree.arc_lo[a]), int(tree.arc_hi[a])
        ext = hi if hi in leaf_nodes else (lo if lo in leaf_nodes else None)
        segs.append(
            Segment(
                a,
                int(sizes[a]),
                ext is not None,
                ext,
                float(tf.values[ext]) if ext is not None else None,
                int(depth[a]),
                lo,
                hi,
            )
        )
    return Segmentation(labels, segs)
