import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from hotopo.errors import DegenerateGrid, NotSimplyConnected
from hotopo.topology import (
    TriangulatedField,
    classify_critical_points,
    contour_tree,
    count_in_range,
    grid_simplices,
    link_components,
    persistence_curve,
    persistence_pairs,
    segmentation,
    simplify,
    triangulate_grid,
)
from hotopo.topology.persistence import PersistencePair, merge_sweep, sublevel_pairs, superlevel_pairs
from hotopo.topology.simplification import extremum_sets
from hotopo.topology.trees import merge_tree
from hotopo.transform import ScalarGrid

from oracles import lower_link_components, sweep_pairs


def grid_field(values, res):
    return triangulate_grid(ScalarGrid(res, (0.0,) * len(res), (1.0,) * len(res), np.asarray(values, float)))


def random_grid(rng, n, dim=2):
    res = (n,) * dim
    return grid_field(rng.random(n**dim), res)


def euler(tf):
    from itertools import combinations

    s = tf.simplices
    faces = 0
    if s.shape[1] == 4:
        tri = np.sort(np.concatenate([s[:, list(c)] for c in combinations(range(4), 3)]), axis=1)
        faces = len(np.unique(tri, axis=0))
        return tf.n_vertices - len(tf.edges) + faces - len(s)
    return tf.n_vertices - len(tf.edges) + len(s)


# -- complexes ---------------------------------------------------------------------


def test_grid_simplex_counts():
    assert len(grid_simplices((2, 2))) == 2
    tf = grid_field(np.zeros(9), (3, 3))
    assert len(tf.simplices) == 8
    assert euler(tf) == 1
    assert len(grid_simplices((2, 2, 2))) == 6
    assert euler(grid_field(np.zeros(27), (3, 3, 3))) == 1


def test_kuhn_tets_fill_the_cube():
    pts = np.array([[x, y, z] for z in (0, 1) for y in (0, 1) for x in (0, 1)], float)
    vol = 0.0
    for t in grid_simplices((2, 2, 2)):
        p = pts[t]
        vol += abs(np.linalg.det(p[1:] - p[0])) / 6
        assert set(t) >= {0, 7}  # all share the main diagonal
    assert vol == pytest.approx(1.0)


def test_degenerate_grid():
    with pytest.raises(DegenerateGrid):
        grid_simplices((1, 5))


def test_complex_validation():
    from hotopo.errors import MeshError

    with pytest.raises(MeshError):
        TriangulatedField(np.zeros((4, 2)), [[0, 1, 2]], np.zeros(4))  # vertex 3 unused
    with pytest.raises(MeshError):
        TriangulatedField(np.zeros((6, 2)), [[0, 1, 2], [3, 4, 5]], np.zeros(6))  # two pieces
    with pytest.raises(MeshError):
        TriangulatedField(np.zeros((3, 2)), [[0, 1, 2]], [0, np.nan, 1])


def test_order_breaks_ties_by_index():
    tf = grid_field([1, 0, 1, 0], (2, 2))
    np.testing.assert_array_equal(tf.order, [1, 3, 0, 2])


# -- critical points ---------------------------------------------------------------


def test_monotone_field_has_two_critical_points():
    x, y = np.meshgrid(np.arange(6), np.arange(5))
    tf = grid_field((x + y).ravel(), (6, 5))
    cps = classify_critical_points(tf)
    assert [(c.vertex, c.type) for c in cps] == [(0, "minimum"), (29, "maximum")]


def test_center_maximum():
    vals = np.array([1, 2, 3, 8, 10, 4, 7, 6, 5], float)
    cps = classify_critical_points(grid_field(vals, (3, 3)))
    assert [c.vertex for c in cps if c.type == "maximum"] == [4]
    assert [c.vertex for c in cps if c.type == "minimum"] == [0]


@pytest.mark.parametrize("dim,n", [(2, 9), (3, 5)])
def test_link_counts_match_simplex_scan(dim, n, rng):
    tf = random_grid(rng, n, dim)
    lo, up = link_components(tf)
    for v in range(0, tf.n_vertices, 3):
        assert lo[v] == lower_link_components(tf, v)
        assert up[v] == lower_link_components(tf, v, upper=True)


def test_classification_invariants(rng):
    tf = random_grid(rng, 12)
    lo, up = link_components(tf)
    by_vertex = {c.vertex: c for c in classify_critical_points(tf)}
    for v in range(tf.n_vertices):
        c = by_vertex.get(v)
        assert (lo[v] == 0) == (c is not None and c.type == "minimum")
        assert (up[v] == 0) == (c is not None and c.type == "maximum")
        if c is not None and c.type == "saddle":
            assert lo[v] >= 2 or up[v] >= 2
            assert c.multiplicity == max(lo[v], up[v]) - 1


def test_three_d_saddles(rng):
    tf = random_grid(rng, 5, dim=3)
    types = {c.type for c in classify_critical_points(tf)}
    assert {"minimum", "maximum"} <= types
    assert types <= {"minimum", "maximum", "1-saddle", "2-saddle"}
    assert all(c.index == {"minimum": 0, "1-saddle": 1, "2-saddle": 2, "maximum": 3}[c.type]
               for c in classify_critical_points(tf))


# -- persistence ------------------------------------------------------------------


def path_csr(n):
    indptr = [0]
    indices = []
    for v in range(n):
        nb = [u for u in (v - 1, v + 1) if 0 <= u < n]
        indices.extend(nb)
        indptr.append(len(indices))
    return np.array(indptr), np.array(indices)


def test_path_graph_pairs():
    vals = np.array([0.0, 2.0, 1.0, 3.0])
    order = np.lexsort((np.arange(4), vals))
    rank = np.empty(4, np.int64)
    rank[order] = np.arange(4)
    indptr, indices = path_csr(4)
    births, deaths = merge_sweep(order, rank, indptr, indices, 2)
    assert list(zip(births.tolist(), deaths.tolist())) == [(2, 1)]
    assert vals[1] - vals[2] == 1
    # on a path the descending sweep finds the same two vertices
    births, deaths = merge_sweep(order[::-1].copy(), 3 - rank, indptr, indices, 2)
    assert list(zip(births.tolist(), deaths.tolist())) == [(1, 2)]


def test_monotone_field_single_pair():
    x, y = np.meshgrid(np.arange(4), np.arange(4))
    pairs = persistence_pairs(grid_field((2 * x + y).ravel().astype(float), (4, 4)))
    assert len(pairs) == 1 and pairs[0].essential
    assert pairs[0].persistence == 9.0


def test_union_find_matches_brute_force(rng):
    for _ in range(25):
        tf = random_grid(rng, 6)
        assert sorted(zip(*[a.tolist() for a in sublevel_pairs(tf)])) == sweep_pairs(tf)
        assert sorted(zip(*[a.tolist() for a in superlevel_pairs(tf)])) == sweep_pairs(tf, descending=True)


def test_pairing_invariants(rng):
    for dim, n in [(2, 15), (3, 6)]:
        tf = random_grid(rng, n, dim)
        pairs = persistence_pairs(tf)
        mins, maxs = extremum_sets(tf)
        kinds = [p.kind for p in pairs]
        assert kinds.count("min-saddle") == len(mins) - 1
        assert kinds.count("saddle-max") == len(maxs) - 1
        assert kinds.count("essential") == 1
        assert all(p.persistence >= 0 for p in pairs)
        births = [p.birth_vertex for p in pairs if p.kind == "min-saddle"]
        assert len(set(births)) == len(births)
        ess = pairs[-1]
        assert ess.persistence == pytest.approx(np.ptp(tf.values))


def test_persistence_curve_examples():
    pairs = [PersistencePair(0, 0.0, 1, 1.0, "min-saddle"), PersistencePair(2, 1.0, 3, 4.0, "saddle-max")]
    assert persistence_curve(pairs, [2.0]) == [(2.0, 1, 1)]
    assert persistence_curve(pairs, [0.5]) == [(0.5, 0, 2)]
    rows = persistence_curve(pairs)
    assert [r[0] for r in rows] == [0.0, 1.0, 3.0]
    assert count_in_range(pairs, 0.5, 1.5) == 1


def test_curve_is_monotone(rng):
    pairs = persistence_pairs(random_grid(rng, 20))
    rows = persistence_curve(pairs, np.linspace(0, 1, 40), include_essential=True)
    leq = [r[1] for r in rows]
    gt = [r[2] for r in rows]
    assert leq == sorted(leq) and gt == sorted(gt, reverse=True)
    assert all(a + b == len(pairs) for a, b in zip(leq, gt))


def test_dense_paper2d_has_eight_long_lived_extrema():
    from hotopo import analytic

    f = analytic("paper2d")
    n = 300
    g = ScalarGrid((n, n), (0, 0), (1 / (n - 1),) * 2, np.zeros(n * n))
    p = g.positions()
    g.values = f(p[:, 0], p[:, 1])
    pairs = persistence_pairs(triangulate_grid(g))
    extrema = set()
    for q in pairs:
        if q.persistence > 0.4:
            if q.kind != "saddle-max":
                extrema.add(q.birth_vertex)
            if q.kind != "min-saddle":
                extrema.add(q.death_vertex)
    assert len(extrema) == 8


# -- simplification -----------------------------------------------------------------


def pair_values(pairs):
    return sorted((p.birth_value, p.death_value) for p in pairs)


def test_simplify_zero_keeps_everything(rng):
    tf = random_grid(rng, 10)
    g = simplify(tf, 0.0)
    assert np.array_equal(g.values, tf.values)
    assert pair_values(persistence_pairs(g)) == pair_values(persistence_pairs(tf))


def test_simplify_everything(rng):
    tf = random_grid(rng, 10)
    g = simplify(tf, float(np.ptp(tf.values)))
    pairs = persistence_pairs(g)
    assert len(pairs) == 1 and pairs[0].essential
    assert pairs[0].persistence == pytest.approx(np.ptp(tf.values))


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(3, 14),
    eps=st.floats(0.0, 1.0),
)
def test_simplify_guarantees(seed, n, eps):
    # what flattening guarantees on any input: kept extrema exactly, bounded change
    vals = np.random.default_rng(seed).random(n * n)
    tf = grid_field(vals, (n, n))
    g = simplify(tf, eps)
    assert np.max(np.abs(g.values - vals)) <= eps
    kept = [p for p in persistence_pairs(tf) if p.essential or p.persistence > eps]
    assert len(persistence_pairs(g)) == len(kept)
    mins, maxs = extremum_sets(g)
    want_min = {p.birth_vertex for p in kept if p.kind != "saddle-max"}
    want_max = {p.death_vertex for p in kept if p.kind != "min-saddle"}
    assert set(mins.tolist()) == want_min and set(maxs.tolist()) == want_max


def test_simplify_smooth_field_exact():
    # well-separated features: the surviving pairs keep their values
    x, y = np.meshgrid(np.linspace(0, 1, 60), np.linspace(0, 1, 60))
    base = np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)
    noise = 0.02 * np.random.default_rng(3).random(base.shape)
    tf = grid_field((base + noise).ravel(), (60, 60))
    g = simplify(tf, 0.1)
    want = pair_values(p for p in persistence_pairs(tf) if p.essential or p.persistence > 0.1)
    np.testing.assert_allclose(pair_values(persistence_pairs(g)), want, atol=1e-12)


def test_simplify_rejects_negative():
    with pytest.raises(ValueError):
        simplify(grid_field(np.arange(4.0), (2, 2)), -1.0)


# -- contour tree and segmentation ------------------------------------------------


def test_monotone_contour_tree():
    x, y = np.meshgrid(np.arange(5), np.arange(4))
    tf = grid_field((x + 3 * y).ravel().astype(float), (5, 4))
    ct = contour_tree(tf)
    assert ct.n_arcs == 1 and len(ct.nodes) == 2
    seg = segmentation(ct, tf)
    assert len(seg.segments) == 1 and seg.segments[0].size == tf.n_vertices


def test_w_profile_join_tree():
    tf = grid_field([0, 2, 1, 3] * 2, (4, 2))
    nxt, cnt, _ = merge_tree(tf.order, *tf.csr)
    leaves = [v for v in range(8) if cnt[v] == 0 and nxt[v] >= 0]
    joins = [v for v in range(8) if cnt[v] >= 2]
    root = [v for v in range(8) if nxt[v] < 0]
    assert sorted(leaves) == [0, 2]
    assert joins == [1]
    assert root == [7]


def test_contour_tree_leaves_are_extrema(rng):
    for _ in range(10):
        tf = random_grid(rng, 14)
        ct = contour_tree(tf)
        mins, maxs = extremum_sets(tf)
        assert set(ct.leaves().tolist()) == set(mins.tolist()) | set(maxs.tolist())
        assert ct.n_arcs == len(ct.nodes) - 1
        assert not np.any(ct.node_degree == 2)
        lo, up = link_components(tf)
        for v, d in zip(ct.nodes.tolist(), ct.node_degree.tolist()):
            if d >= 3:
                assert lo[v] >= 2 or up[v] >= 2
            if d == 3:
                assert max(lo[v], up[v]) == 2


def test_contour_tree_is_a_tree(rng):
    tf = random_grid(rng, 16)
    ct = contour_tree(tf)
    n = tf.n_vertices
    g = coo_matrix((np.ones(ct.n_arcs), (ct.arc_lo, ct.arc_hi)), shape=(n, n))
    ncomp, lab = connected_components(g, directed=False)
    assert len(set(lab[ct.nodes].tolist())) == 1


def test_not_simply_connected():
    # a triangulated ring of 8 outer and 8 inner vertices
    ang = np.arange(8) * np.pi / 4
    pts = np.concatenate([np.c_[2 * np.cos(ang), 2 * np.sin(ang)], np.c_[np.cos(ang), np.sin(ang)]])
    tris = []
    for i in range(8):
        j = (i + 1) % 8
        tris += [[i, j, 8 + j], [i, 8 + j, 8 + i]]
    tf = TriangulatedField(pts, tris, pts[:, 0] + 0.01 * np.arange(16))
    with pytest.raises(NotSimplyConnected):
        contour_tree(tf)


def test_segmentation_covers_vertices(rng):
    for _ in range(100):
        tf = random_grid(rng, 16)
        ct = contour_tree(tf)
        seg = segmentation(ct, tf)
        assert len(seg.segments) == ct.n_arcs
        assert np.all(seg.labels >= 0)
        assert sum(s.size for s in seg.segments) == tf.n_vertices


def _component_of(tf, v, mask):
    """Edge-connected component of ``v`` inside the vertex mask."""
    e = tf.edges
    keep = mask[e[:, 0]] & mask[e[:, 1]]
    n = tf.n_vertices
    g = coo_matrix((np.ones(keep.sum()), (e[keep, 0], e[keep, 1])), shape=(n, n))
    _, comp = connected_components(g, directed=False)
    return set(np.nonzero(mask & (comp == comp[v]))[0].tolist())


@pytest.mark.parametrize("smooth", [False, True])
def test_leaf_segment_is_level_component(rng, smooth):
    # a max leaf owns exactly the superlevel component above its saddle, a min
    # leaf the sublevel one; interior arcs can be a single cell thick and need
    # not be edge-connected as vertex sets
    from scipy.ndimage import gaussian_filter

    for _ in range(40):
        vals = rng.random((16, 16))
        if smooth:
            vals = gaussian_filter(vals, 2.0, mode="nearest")
        tf = grid_field(vals.ravel(), (16, 16))
        seg = segmentation(contour_tree(tf), tf)
        rank = tf.rank
        for s in seg.leaf_segments():
            ext = s.extremum_vertex
            other = s.lo if ext == s.hi else s.hi
            mask = rank > rank[other] if ext == s.hi else rank < rank[other]
            want = _component_of(tf, ext, mask)
            if seg.labels[other] == s.id:
                want.add(other)  # a saddle with a single arc on this side joins it
            assert set(np.nonzero(seg.labels == s.id)[0].tolist()) == want


def test_contour_tree_matches_level_set_components(rng):
    from oracles import level_set_components

    for _ in range(10):
        tf = random_grid(rng, 10)
        ct = contour_tree(tf)
        lo, hi = tf.values[ct.arc_lo], tf.values[ct.arc_hi]
        v = np.sort(tf.values)
        for t in 0.5 * (v[:-1] + v[1:]):
            assert level_set_components(tf, t) == np.count_nonzero((lo < t) & (hi > t))


def test_segment_metadata(rng):
    tf = random_grid(rng, 12)
    ct = contour_tree(tf)
    seg = segmentation(ct, tf)
    leaves = set(ct.leaves().tolist())
    for s in seg.segments:
        assert s.is_leaf == (s.lo in leaves or s.hi in leaves)
        assert (s.depth == 0) == s.is_leaf
        if s.is_leaf:
            assert s.extremum_value == tf.values[s.extremum_vertex]
    assert len(seg.leaf_segments(min_size=10**9)) == 0


def test_order_only_dependence(rng):
    tf = random_grid(rng, 12)
    warped = tf.with_values(np.exp(3 * tf.values) - 7)
    a = classify_critical_points(tf)
    b = classify_critical_points(warped)
    assert [(c.vertex, c.type) for c in a] == [(c.vertex, c.type) for c in b]
    pa = [(p.birth_vertex, p.death_vertex, p.kind) for p in persistence_pairs(tf)]
    pb = [(p.birth_vertex, p.death_vertex, p.kind) for p in persistence_pairs(warped)]
    assert pa == pb
    ta, tb = contour_tree(tf), contour_tree(warped)
    np.testing.assert_array_equal(ta.arc_lo, tb.arc_lo)
    np.testing.assert_array_equal(ta.arc_hi, tb.arc_hi)
    np.testing.assert_array_equal(segmentation(ta, tf).labels, segmentation(tb, warped).labels)
