"""Contour trees by join/split combination, plus tree comparison.

The combination peels leaves off the two simplified merge trees after
cross-augmenting their node sets. Every vertex of the domain is then mapped
to the contour-tree edge whose value span contains it, using only merge-tree
segmentations and short walks in the trees: a vertex whose segmentation edge
already spans its value resolves there; a vertex swept into a cancelled
branch descends the path toward the lowest leaf below its edge until the
spanning edge is found. The (join edge, split edge) pair of a vertex then
identifies its contour-tree edge through a precomputed lookup table, which
is cheaper than materializing per-edge voxel regions.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InternalConsistencyError
from .grid import ScalarField
from .mergetree import MergeTree


@dataclass
class FalseCaseReport:
    """Edge-level differences between a reference tree and a candidate."""

    false_positives: list[tuple[int, int]]
    false_negatives: list[tuple[int, int]]
    false_types: list[tuple[int, int]]

    @property
    def counts(self) -> tuple[int, int, int]:
        return (len(self.false_positives), len(self.false_negatives),
                len(self.false_types))

    @property
    def is_clean(self) -> bool:
        return self.counts == (0, 0, 0)

    def __str__(self) -> str:
        fp, fn, ft = self.counts
        return f"(fp={fp}, fn={fn}, ft={ft})"


@dataclass
class ContourTree:
    """Combined simplified join/split tree with per-vertex edge assignment."""

    node_vertex: list[int]
    node_type: dict[int, str]                 # vertex -> min | max | saddle
    edges: list[tuple[int, int]]              # (lower vertex, upper vertex)
    segmentation: np.ndarray = None           # vertex -> edge index, -1 at nodes
    edge_lookup: dict = field(default=None, repr=False)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(min(u, v), max(u, v)) for u, v in self.edges}


class _TreeAux:
    """Descent/walk helpers over one simplified merge tree."""

    def __init__(self, tree: MergeTree):
        self.tree = tree
        nr = [int(tree.ranks[v]) for v in tree.node_vertex]
        self.node_rank = nr
        n_nodes = tree.n_nodes
        self.elder_child = [-1] * n_nodes
        sub_min = list(nr)
        for nid in sorted(range(n_nodes), key=lambda i: nr[i]):
            p = tree.parent[nid]
            if p >= 0 and sub_min[nid] < sub_min[p]:
                sub_min[p] = sub_min[nid]
                self.elder_child[p] = nid

    def resolve(self, start_edge: int, r: int) -> int:
        """Edge (child node id) whose rank span contains r, starting from the
        segmentation edge and descending the elder path when below it."""
        tree = self.tree
        p = tree.parent[start_edge]
        if p < 0 or r > self.node_rank[p]:
            raise InternalConsistencyError(
                "query rank above its segmentation edge span")
        c = start_edge
        while self.node_rank[c] > r:
            c = self.elder_child[c]
            if c < 0:
                raise InternalConsistencyError(
                    "no spanning edge below segmentation edge")
        return c

    def resolve_many(self, start_edge: int, rs: np.ndarray) -> np.ndarray:
        tree = self.tree
        p = tree.parent[start_edge]
        if p < 0:
            raise InternalConsistencyError("segmentation edge has no parent")
        path = [start_edge]
        while self.elder_child[path[-1]] >= 0:
            path.append(self.elder_child[path[-1]])
        pr = np.array([self.node_rank[c] for c in path], dtype=np.int64)
        if rs.max() > self.node_rank[p] or rs.min() <= pr[-1]:
            raise InternalConsistencyError("query rank outside reachable spans")
        idx = np.searchsorted(-pr, -rs, side="right")
        return np.asarray(path, dtype=np.int64)[idx]

    def walk_up(self, start_edge: int, lo: int, hi: int) -> list[tuple[int, int, int]]:
        """Tiles (edge id, lo, hi) covering the open rank interval (lo, hi)."""
        tree = self.tree
        out = []
        e = start_edge
        while True:
            p = tree.parent[e]
            if p < 0:
                raise InternalConsistencyError("walked past the tree root")
            top = self.node_rank[p]
            cut = min(top, hi)
            if cut > lo:
                out.append((e, lo, cut))
            if top >= hi:
                return out
            e, lo = p, top


def combine(join: MergeTree, split: MergeTree, fld: ScalarField,
            compute_segmentation: bool = True) -> ContourTree:
    """Merge simplified join and split trees into the contour tree."""
    n = fld.size
    if join.edge_of.size != n or split.edge_of.size != n:
        raise InternalConsistencyError("trees disagree with the field size")
    if join.kind != "join" or split.kind != "split":
        raise InternalConsistencyError("combine expects a (join, split) pair")

    rank_j = join.ranks
    if n == 1:
        return ContourTree([0], {0: "min"}, [], np.full(1, -1, np.int32), {})

    jaux = _TreeAux(join)
    saux = _TreeAux(split)
    w_set = set(join.node_vertex) | set(split.node_vertex)
    w = sorted(w_set, key=lambda v: int(rank_j[v]))

    # Where each combined node sits in each tree: its own outgoing edge when
    # it is a node there, otherwise the spanning edge of its rank.
    j_start: dict[int, int] = {}
    s_start: dict[int, int] = {}
    for v in w:
        if join.has_node(v):
            nid = join.node_of(v)
            j_start[v] = nid if join.parent[nid] >= 0 else -1
        else:
            j_start[v] = jaux.resolve(int(join.edge_of[v]), int(rank_j[v]))
        if split.has_node(v):
            nid = split.node_of(v)
            s_start[v] = nid if split.parent[nid] >= 0 else -1
        else:
            s_start[v] = saux.resolve(int(split.edge_of[v]), int(split.ranks[v]))

    jp_parent, j_children = _augmented_links(join, jaux, w, j_start)
    sp_parent, s_children = _augmented_links(split, saux, w, s_start)

    edges = _peel(w, rank_j, jp_parent, j_children, sp_parent, s_children)

    degree: dict[int, int] = {v: 0 for v in w}
    adj: dict[int, int] = {}
    for u, v in edges:
        degree[u] += 1
        degree[v] += 1
        adj[u] = v
        adj[v] = u
    node_type = {}
    for v in w:
        if degree[v] != 1:
            node_type[v] = "saddle"
        else:
            node_type[v] = "min" if rank_j[v] < rank_j[adj[v]] else "max"

    ct = ContourTree(w, node_type, edges)
    ct.edge_lookup = _build_edge_lookup(join, split, jaux, saux, rank_j, n,
                                        edges, j_start, s_start)
    if compute_segmentation:
        ct.segmentation = _segment_all(join, split, jaux, saux, ct, n)
    else:
        ct.segmentation = np.full(n, -1, dtype=np.int32)
    return ct


def _augmented_links(tree: MergeTree, aux: _TreeAux, w: list[int],
                     start: dict[int, int]):
    """Parent/children links over the combined node set, one tree side."""
    inserted: dict[int, list[int]] = {}
    for v in w:
        if not tree.has_node(v):
            inserted.setdefault(start[v], []).append(v)
    parent_of: dict[int, int | None] = {}
    children: dict[int, set[int]] = {v: set() for v in w}
    for c, p in tree.edges():
        chain = [tree.node_vertex[c]]
        chain += sorted(inserted.get(c, ()), key=lambda v: int(tree.ranks[v]))
        chain.append(tree.node_vertex[p])
        for a, b in zip(chain, chain[1:]):
            parent_of[a] = b
            children[b].add(a)
    parent_of[tree.node_vertex[tree.root]] = None
    return parent_of, children


def _peel(w, rank_j, jp_parent, j_children, sp_parent, s_children):
    """Leaf peeling over the two augmented trees."""
    remaining = set(w)
    edges: list[tuple[int, int]] = []

    def lower_ok(v):
        return len(j_children[v]) == 0 and len(s_children[v]) <= 1

    def upper_ok(v):
        return len(s_children[v]) == 0 and len(j_children[v]) <= 1

    queue = deque(v for v in w if lower_ok(v) or upper_ok(v))
    queued = set(queue)
    while len(remaining) > 1:
        if not queue:
            raise InternalConsistencyError("leaf peeling stalled")
        v = queue.popleft()
        queued.discard(v)
        if v not in remaining:
            continue
        if lower_ok(v) and jp_parent[v] is not None:
            partner = jp_parent[v]
            edges.append((v, partner))
            _splice(v, jp_parent, j_children, drop_only=True)
            _splice(v, sp_parent, s_children, drop_only=False)
        elif upper_ok(v) and sp_parent[v] is not None:
            partner = sp_parent[v]
            edges.append((partner, v))
            _splice(v, sp_parent, s_children, drop_only=True)
            _splice(v, jp_parent, j_children, drop_only=False)
        else:
            continue
        remaining.discard(v)
        for u in (partner,):
            if u in remaining and u not in queued and (lower_ok(u) or upper_ok(u)):
                queue.append(u)
                queued.add(u)
        # splicing may have changed eligibility of the spliced child too
        for u in list(j_children.get(partner, ())) + list(s_children.get(partner, ())):
            if u in remaining and u not in queued and (lower_ok(u) or upper_ok(u)):
                queue.append(u)
                queued.add(u)
    return edges


def _splice(v, parent_of, children, drop_only: bool):
    """Remove v from one augmented tree, reconnecting its single child."""
    p = parent_of[v]
    kids = children[v]
    if drop_only and kids:
        raise InternalConsistencyError("peeled vertex still has children")
    if len(kids) > 1:
        raise InternalConsistencyError("cannot splice a branching vertex")
    child = next(iter(kids)) if kids else None
    if p is not None:
        children[p].discard(v)
        if child is not None:
            children[p].add(child)
    if child is not None:
        parent_of[child] = p
    children[v] = set()
    parent_of[v] = None


def _build_edge_lookup(join, split, jaux, saux, rank_j, n, edges,
                       j_start, s_start):
    """Map (join edge, split edge) -> [(lo, hi, contour edge index)]."""
    table: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
    for idx, (a, b) in enumerate(edges):
        ra, rb = int(rank_j[a]), int(rank_j[b])
        jt = jaux.walk_up(_out_edge(join, j_start, a), ra, rb)
        # split walk runs in split ranks, from the upper endpoint downward
        sa, sb = n - 1 - rb, n - 1 - ra
        st_raw = saux.walk_up(_out_edge(split, s_start, b), sa, sb)
        st = [(e, n - 1 - hi, n - 1 - lo) for (e, lo, hi) in st_raw][::-1]
        for je, se, lo, hi in _merge_tiles(jt, st):
            table.setdefault((je, se), []).append((lo, hi, idx))
    for entries in table.values():
        entries.sort()
        for (l1, h1, _), (l2, _h2, _) in zip(entries, entries[1:]):
            if l2 < h1:
                raise InternalConsistencyError("overlapping lookup tiles")
    return table


def _out_edge(tree: MergeTree, start: dict[int, int], v: int) -> int:
    e = start[v]
    if e < 0:
        raise InternalConsistencyError("walk started at the tree root")
    return e


def _merge_tiles(jt, st):
    out = []
    i = j = 0
    while i < len(jt) and j < len(st):
        je, jlo, jhi = jt[i]
        se, slo, shi = st[j]
        lo, hi = max(jlo, slo), min(jhi, shi)
        if hi > lo:
            out.append((je, se, lo, hi))
        if jhi <= shi:
            i += 1
        if shi <= jhi:
            j += 1
    return out


def _segment_all(join, split, jaux, saux, ct: ContourTree, n: int) -> np.ndarray:
    rank_j = join.ranks
    rank_s = split.ranks
    seg = np.full(n, -1, dtype=np.int32)
    is_node = np.zeros(n, dtype=bool)
    is_node[ct.node_vertex] = True
    others = np.nonzero(~is_node)[0]
    if others.size == 0:
        return seg

    je = _resolve_field(join, jaux, rank_j, others)
    se = _resolve_field(split, saux, rank_s, others)

    key = je.astype(np.int64) * (split.n_nodes + 1) + se
    order = np.argsort(key, kind="stable")
    ranks_o = rank_j[others]
    start = 0
    sorted_keys = key[order]
    while start < order.size:
        stop = start
        k = sorted_keys[start]
        while stop < order.size and sorted_keys[stop] == k:
            stop += 1
        sel = order[start:stop]
        pair = (int(je[sel[0]]), int(se[sel[0]]))
        entries = ct.edge_lookup.get(pair)
        if not entries:
            raise InternalConsistencyError(
                f"no contour edge for merge-edge pair {pair}")
        if len(entries) == 1:
            seg[others[sel]] = entries[0][2]
        else:
            los = np.array([e[0] for e in entries])
            his = np.array([e[1] for e in entries])
            ids = np.array([e[2] for e in entries])
            pos = np.searchsorted(los, ranks_o[sel], side="right") - 1
            bad = (pos < 0) | (ranks_o[sel] >= his[np.clip(pos, 0, None)])
            if np.any(bad):
                raise InternalConsistencyError("vertex rank outside lookup tiles")
            seg[others[sel]] = ids[pos]
        start = stop
    return seg


def _resolve_field(tree: MergeTree, aux: _TreeAux, ranks, verts) -> np.ndarray:
    out = np.empty(verts.size, dtype=np.int64)
    start_edges = tree.edge_of[verts]
    order = np.argsort(start_edges, kind="stable")
    rs = ranks[verts]
    i = 0
    se_sorted = start_edges[order]
    while i < order.size:
        j = i
        e = se_sorted[i]
        while j < order.size and se_sorted[j] == e:
            j += 1
        sel = order[i:j]
        out[sel] = aux.resolve_many(int(e), rs[sel])
        i = j
    return out


def resolve_spanning_edge(ct: ContourTree, join: MergeTree, split: MergeTree,
                          vertex: int) -> tuple[int, int]:
    """Endpoint vertices (lower, upper) of the contour edge spanning a vertex."""
    eid = int(ct.segmentation[vertex])
    if eid < 0:
        raise InternalConsistencyError(f"vertex {vertex} is a contour tree node")
    return ct.edges[eid]


def compare_trees(reference, candidate) -> FalseCaseReport:
    """Diff two trees of the same kind into false positives/negatives/types.

    Accepts two ContourTree or two MergeTree objects. Edges are keyed by
    their endpoint vertex ids; shared edges with a mismatched endpoint
    critical type count as false types.
    """
    ref_edges, ref_types = _edges_and_types(reference)
    cand_edges, cand_types = _edges_and_types(candidate)
    fp = sorted(cand_edges - ref_edges)
    fn = sorted(ref_edges - cand_edges)
    ft = []
    for e in sorted(ref_edges & cand_edges):
        u, v = e
        if ref_types[u] != cand_types[u] or ref_types[v] != cand_types[v]:
            ft.append(e)
    return FalseCaseReport(fp, fn, ft)


def _edges_and_types(tree):
    if isinstance(tree, ContourTree):
        return tree.edge_set(), dict(tree.node_type)
    if isinstance(tree, MergeTree):
        edges = {(min(a, b), max(a, b)) for a, b in tree.edge_vertex_pairs()}
        types = {tree.node_vertex[i]: tree.node_type[i]
                 for i in range(tree.n_nodes)}
        return edges, types
    raise TypeError(f"cannot compare {type(tree).__name__}")
