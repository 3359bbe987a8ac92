import numpy as np
import pytest

from topocomp import grid, synth
from topocomp.contour import ContourTree, FalseCaseReport, combine, compare_trees
from topocomp.errors import InternalConsistencyError
from topocomp.mergetree import build_merge_tree, simplify_tree


def trees_of(f, eps_abs=0.0):
    jt = simplify_tree(build_merge_tree(f, "join"), eps_abs)
    st = simplify_tree(build_merge_tree(f, "split"), eps_abs)
    return jt, st


def test_monotone_contour_tree_single_edge():
    f = synth.make_field("ramp", (4, 3, 2))
    ct = combine(*trees_of(f), f)
    assert ct.edges == [(0, f.size - 1)]
    assert ct.node_type[0] == "min" and ct.node_type[f.size - 1] == "max"
    assert set(ct.segmentation.tolist()) <= {0, -1}


def test_two_gaussian_contour_tree_shape():
    f = synth.make_field("gaussians", (16, 16, 16), seed=11, count=2)
    jt, st = trees_of(f, 0.05 * f.value_range)
    ct = combine(jt, st, f)
    counts = {}
    for t in ct.node_type.values():
        counts[t] = counts.get(t, 0) + 1
    assert counts == {"max": 2, "saddle": 1, "min": 1}
    assert len(ct.edges) == 3


def test_combined_leaf_count_identity(rng):
    # with degree-1 roots (counted as leaves), contour tree leaf count is
    # (#join leaves - 1) + (#split leaves - 1)
    for _ in range(12):
        dims = tuple(int(d) for d in rng.integers(3, 7, 3))
        f = grid.ScalarField(dims, rng.random(int(np.prod(dims))))
        jt, st = trees_of(f)
        j_root_deg = sum(1 for _, p in jt.edges() if p == jt.root)
        s_root_deg = sum(1 for _, p in st.edges() if p == st.root)
        if j_root_deg != 1 or s_root_deg != 1:
            continue
        ct = combine(jt, st, f)
        n_leaves = sum(1 for v, t in ct.node_type.items() if t in ("min", "max"))
        j_deg1 = sum(1 for t in jt.node_type if t == "leaf") + 1
        s_deg1 = sum(1 for t in st.node_type if t == "leaf") + 1
        assert n_leaves == (j_deg1 - 1) + (s_deg1 - 1)
        assert len(ct.edges) == len(ct.node_vertex) - 1


def test_contour_leaves_are_field_extrema(rng):
    for _ in range(20):
        dims = tuple(int(d) for d in rng.integers(2, 7, 3))
        n = int(np.prod(dims))
        vals = rng.integers(0, 6, n).astype(float) if rng.random() < 0.5 \
            else rng.random(n)
        f = grid.ScalarField(dims, vals)
        jt, st = trees_of(f)
        ct = combine(jt, st, f)
        nbrt = grid.neighbor_table(dims)
        mins = set(grid.local_minima(jt.ranks, nbrt).tolist())
        maxs = set(grid.local_minima(st.ranks, nbrt).tolist())
        assert {v for v, t in ct.node_type.items() if t == "min"} == mins
        assert {v for v, t in ct.node_type.items() if t == "max"} == maxs


def test_every_vertex_spans_its_contour_edge(rng):
    for _ in range(15):
        dims = tuple(int(d) for d in rng.integers(3, 8, 3))
        f = grid.ScalarField(dims, rng.random(int(np.prod(dims))))
        eps = float(rng.random() * 0.5 * f.value_range)
        jt, st = trees_of(f, eps)
        ct = combine(jt, st, f)
        ranks = jt.ranks
        for x in range(f.size):
            e = ct.segmentation[x]
            if e < 0:
                assert x in ct.node_type
                continue
            a, b = ct.edges[e]
            assert ranks[a] < ranks[x] < ranks[b]


def test_combine_rejects_mismatched_fields():
    f1 = synth.make_field("ramp", (3, 3, 3))
    f2 = synth.make_field("ramp", (4, 3, 3))
    jt, st = trees_of(f1)
    with pytest.raises(InternalConsistencyError):
        combine(jt, st, f2)


def test_single_vertex_contour_tree():
    f = grid.ScalarField((1, 1, 1), np.array([2.0]))
    ct = combine(build_merge_tree(f, "join"), build_merge_tree(f, "split"), f)
    assert ct.edges == [] and ct.node_vertex == [0]


def test_compare_identical_trees():
    f = synth.make_field("gaussians", (10, 10, 10), seed=3, count=2)
    jt, st = trees_of(f, 0.02)
    ct1 = combine(jt, st, f, compute_segmentation=False)
    ct2 = combine(jt, st, f, compute_segmentation=False)
    rep = compare_trees(ct1, ct2)
    assert rep.is_clean and rep.counts == (0, 0, 0)


def test_compare_counts_extra_branch_as_false_positive():
    ref = ContourTree([0, 5], {0: "min", 5: "max"}, [(0, 5)])
    cand = ContourTree([0, 3, 5, 7], {0: "min", 3: "saddle", 5: "max", 7: "max"},
                       [(0, 3), (3, 5), (3, 7)])
    rep = compare_trees(ref, cand)
    assert len(rep.false_positives) == 3 and len(rep.false_negatives) == 1


def test_compare_counts_type_change_as_false_type():
    ref = ContourTree([0, 5], {0: "min", 5: "max"}, [(0, 5)])
    cand = ContourTree([0, 5], {0: "min", 5: "saddle"}, [(0, 5)])
    rep = compare_trees(ref, cand)
    assert rep.counts == (0, 0, 1)
    assert rep.false_types == [(0, 5)]


def test_compare_merge_trees():
    f = synth.make_field("gaussians", (8, 8, 8), seed=5, count=2)
    t1 = build_merge_tree(f, "join")
    t2 = build_merge_tree(f, "join")
    assert compare_trees(t1, t2).is_clean


def test_compare_rejects_unknown_types():
    with pytest.raises(TypeError):
        compare_trees(object(), object())
