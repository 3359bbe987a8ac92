import numpy as np
import pytest

from topocomp import grid, synth
from topocomp.errors import InternalConsistencyError
from topocomp.mergetree import (build_merge_tree, dump_edges,
                                persistence_pairs, simplify_tree)

from oracles import canonical_tree, sweep_merge_tree


def path_field(values):
    return grid.ScalarField((len(values), 1, 1), np.asarray(values, float))


def test_1d_path_join_tree():
    t = build_merge_tree(path_field([0., 2., 1., 3.]), "join")
    assert t.edge_vertex_pairs() == {(0, 1), (2, 1), (1, 3)}
    types = {t.node_vertex[i]: t.node_type[i] for i in range(t.n_nodes)}
    assert types == {0: "leaf", 2: "leaf", 1: "saddle", 3: "root"}
    assert t.pairs == [(2, 1, 1.0)]
    assert t.essential_pair == (0, 3, 3.0)


def test_persistence_pairs_listing():
    t = build_merge_tree(path_field([0., 2., 1., 3.]), "join")
    assert persistence_pairs(t) == [(2, 1, 1.0), (0, 3, 3.0)]


def test_monotone_field_single_edge():
    vol = synth.make_field("ramp", (4, 3, 2))
    t = build_merge_tree(vol, "join")
    assert len(t.edges()) == 1
    assert t.pairs == []
    assert t.essential_pair[0] == 0 and t.essential_pair[1] == vol.size - 1


def test_w_shaped_field_pairing():
    t = build_merge_tree(path_field([0., 3., 1., 3., 0.5]), "join")
    # the deepest minimum survives to the root; side minima pair locally
    assert sorted(t.pairs) == [(2, 1, 2.0), (4, 3, 2.5)]
    assert t.essential_pair[0] == 0


def test_single_edge_tree_essential_is_range():
    f = path_field([0.25, 1.25])
    t = build_merge_tree(f, "join")
    assert persistence_pairs(t) == [(0, 1, 1.0)]


def test_two_gaussian_split_tree():
    f = synth.make_field("gaussians", (16, 16, 16), seed=11, count=2)
    t = simplify_tree(build_merge_tree(f, "split"), 0.05 * f.value_range)
    leaves = [i for i, ty in enumerate(t.node_type) if ty == "leaf"]
    saddles = [i for i, ty in enumerate(t.node_type) if ty == "saddle"]
    assert len(leaves) == 2 and len(saddles) == 1


def test_split_tree_is_join_of_mirror(rng):
    for _ in range(10):
        f = random_small(rng)
        split = build_merge_tree(f, "split")
        assert canonical_tree(split) == sweep_merge_tree(f, "split")


def random_small(rng):
    dims = tuple(int(d) for d in rng.integers(2, 6, 3))
    n = int(np.prod(dims))
    vals = rng.integers(0, 5, n).astype(float) if rng.random() < 0.5 \
        else rng.random(n)
    return grid.ScalarField(dims, vals)


def test_oracle_equivalence_random_fields(rng):
    for _ in range(60):
        f = random_small(rng)
        for kind in ("join", "split"):
            assert canonical_tree(build_merge_tree(f, kind)) == \
                sweep_merge_tree(f, kind)


def monkey_saddle_field():
    # center of a 3x3 sheet with exactly three separated lower-link basins
    vals = np.full((3, 3, 1), 9.0)
    vals[1, 1, 0] = 5.0
    vals[0, 1, 0] = 1.0
    vals[1, 0, 0] = 2.0
    vals[2, 2, 0] = 3.0
    return grid.ScalarField((3, 3, 1), vals.ravel(order="F"))


def test_monkey_saddle_multi_pairing():
    f = monkey_saddle_field()
    t = build_merge_tree(f, "join")
    assert canonical_tree(t) == sweep_merge_tree(f, "join")
    center = f.index_of(1, 1, 0)
    paired_here = [p for p in t.pairs if p[1] == center]
    assert len(paired_here) == 2  # two younger basins die at the same saddle


def test_pairs_cover_every_non_root_leaf(rng):
    for _ in range(15):
        f = random_small(rng)
        t = build_merge_tree(f, "join")
        leaves = {t.node_vertex[i] for i, ty in enumerate(t.node_type)
                  if ty == "leaf"}
        paired = {p[0] for p in t.pairs}
        assert paired | {t.essential_pair[0]} == leaves or \
            t.essential_pair[0] in leaves and paired == leaves - {t.essential_pair[0]}
        assert all(p[2] >= 0 for p in t.pairs)


def test_edges_monotone_and_segmentation_total(rng):
    for _ in range(10):
        f = random_small(rng)
        for kind in ("join", "split"):
            t = build_merge_tree(f, kind)
            ranks = t.ranks
            for c, p in t.edges():
                assert ranks[t.node_vertex[c]] < ranks[t.node_vertex[p]]
            assert np.all(t.edge_of >= 0) or f.size == 1


def test_simplify_eps_zero_is_identity(rng):
    f = random_small(rng)
    t = build_merge_tree(f, "join")
    assert canonical_tree(simplify_tree(t, 0.0)) == canonical_tree(t)


def test_simplify_above_range_leaves_single_edge():
    f = path_field([0., 3., 1., 3., 0.5])
    t = simplify_tree(build_merge_tree(f, "join"), 99.0)
    assert len(t.edges()) == 1
    assert {ty for ty in t.node_type} == {"leaf", "root"}


def test_simplify_reconnects_across_removed_branch():
    # removing a short branch at its saddle joins the surviving neighbors
    f = path_field([0., 3., 2.4, 3.5, 1., 4.])
    t = build_merge_tree(f, "join")
    s = simplify_tree(t, 0.7)  # branch (2, 1) has persistence 0.6
    assert (2, 1) not in s.edge_vertex_pairs()
    assert not s.has_node(2) and not s.has_node(1)
    assert (0, 3) in s.edge_vertex_pairs()


def test_simplify_idempotent_and_threshold(rng):
    for _ in range(12):
        f = random_small(rng)
        t = build_merge_tree(f, "join")
        eps = float(rng.random() * f.value_range)
        s = simplify_tree(t, eps)
        assert all(p[2] >= eps for p in s.pairs)
        assert canonical_tree(simplify_tree(s, eps)) == canonical_tree(s)
        assert np.all(s.edge_of >= 0)


def test_simplify_rejects_negative_threshold():
    t = build_merge_tree(path_field([0., 1.]), "join")
    with pytest.raises(ValueError):
        simplify_tree(t, -1.0)


def test_dump_edges_format():
    t = build_merge_tree(path_field([0., 2., 1., 3.]), "join")
    lines = dump_edges(t).splitlines()
    assert len(lines) == 3
    assert lines[0].split()[:2] == ["0", "1"]
