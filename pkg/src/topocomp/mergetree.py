"""Join/split tree construction by edge growing, persistence pairing, simplification.

The builder grows one component per local extremum, visiting vertices through
a binary heap keyed by total-order rank. Component heaps are merged by
inserting the smaller heap's entries into the larger one. A component arriving
at a vertex whose lower link is not fully covered by the component suspends
there; the last component to arrive completes the saddle, absorbs the others,
and keeps growing. Arrivals that do not complete a saddle pair their branch
extremum with it (the completing branch carries the elder extremum onward),
which reproduces branch-decomposition persistence pairing, higher-order
saddles included.

Edges are identified by their child node id; ``edge_of`` maps every vertex to
the edge it was swept into.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import grid
from .errors import InternalConsistencyError


@lru_cache(maxsize=8)
def _neighbor_lists(dims: tuple[int, int, int]) -> list[list[int]]:
    table = grid.neighbor_table(dims).tolist()
    return [[w for w in row if w >= 0] for row in table]


@dataclass
class MergeTree:
    kind: str                                  # "join" | "split"
    node_vertex: list[int]
    node_type: list[str]                       # "leaf" | "saddle" | "root"
    node_value: list[float]
    parent: list[int]                          # node id -> node id, -1 at root
    root: int
    pairs: list[tuple[int, int, float]]        # finite (extremum, saddle, persistence)
    essential_pair: tuple[int, int, float]     # (global extremum, root vertex, span)
    edge_of: np.ndarray                        # vertex -> child node id of its edge
    ranks: np.ndarray                          # vertex -> sweep position of this kind

    _node_of: dict[int, int] = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.node_vertex)

    def node_of(self, vertex: int) -> int:
        if self._node_of is None:
            self._node_of = {v: i for i, v in enumerate(self.node_vertex)}
        return self._node_of[vertex]

    def has_node(self, vertex: int) -> bool:
        if self._node_of is None:
            self._node_of = {v: i for i, v in enumerate(self.node_vertex)}
        return vertex in self._node_of

    def children(self) -> list[list[int]]:
        ch = [[] for _ in range(self.n_nodes)]
        for nid, p in enumerate(self.parent):
            if p >= 0:
                ch[p].append(nid)
        return ch

    def edges(self) -> list[tuple[int, int]]:
        """Edges as (child node id, parent node id)."""
        return [(nid, p) for nid, p in enumerate(self.parent) if p >= 0]

    def leaf_edges(self) -> dict[int, int]:
        """Map leaf vertex -> parent node vertex, over leaf-typed nodes."""
        out = {}
        for nid, t in enumerate(self.node_type):
            if t == "leaf":
                out[self.node_vertex[nid]] = self.node_vertex[self.parent[nid]]
        return out

    def edge_vertex_pairs(self) -> set[tuple[int, int]]:
        """Edges keyed by (child vertex, parent vertex)."""
        return {
            (self.node_vertex[c], self.node_vertex[p])
            for c, p in self.edges()
        }


def persistence_pairs(tree: MergeTree) -> list[tuple[int, int, float]]:
    """All pairs, the essential (global extremum, root) pair last."""
    return list(tree.pairs) + [tree.essential_pair]


def build_merge_tree(fld: grid.ScalarField, kind: str) -> MergeTree:
    """Grow the join or split tree of a field under the strict total order."""
    if kind not in ("join", "split"):
        raise ValueError(f"kind must be 'join' or 'split', got {kind!r}")
    order = grid.sort_order(fld, reverse=(kind == "split"))
    ranks = grid.rank_of(order)
    return _grow(fld, kind, order, ranks)


def _grow(fld: grid.ScalarField, kind: str, order: np.ndarray, ranks: np.ndarray) -> MergeTree:
    n = fld.size
    vals = fld.values
    nbrs = _neighbor_lists(fld.dims)
    order_l: list[int] = order.tolist()
    rank_l: list[int] = ranks.tolist()

    node_vertex: list[int] = []
    node_type: list[str] = []
    parent: list[int] = []

    comp_of: list[int] = [-1] * n          # vertex -> component id at assignment
    uf: dict[int, int] = {}                # component id -> parent id
    heaps: dict[int, list[int]] = {}       # root -> heap of ranks
    from_node: dict[int, int] = {}         # root -> node id the open edge grows from
    region: dict[int, list[int]] = {}      # root -> vertices of the open edge
    rep: dict[int, int] = {}               # root -> elder extremum vertex
    edge_verts: dict[int, list[int]] = {}  # edge id (child node id) -> vertices
    last_child_edge: dict[int, int] = {}   # root -> child edge id of latest saddle
    arrivals: dict[int, list[int]] = {}    # pending saddle vertex -> arrived roots
    pairs: list[tuple[int, int, float]] = []

    def find(c: int) -> int:
        r = c
        while uf[r] != r:
            r = uf[r]
        while uf[c] != r:
            uf[c], c = r, uf[c]
        return r

    def new_node(v: int, t: str) -> int:
        node_vertex.append(v)
        node_type.append(t)
        parent.append(-1)
        return len(node_vertex) - 1

    # Minima of this sweep orientation, processed in decreasing rank so the
    # first arrival at any saddle is always the youngest branch.
    nbr_table = grid.neighbor_table(fld.dims)
    minima = grid.local_minima(ranks, nbr_table)
    minima = sorted(minima.tolist(), key=lambda m: -rank_l[m])

    if n == 1:
        root = new_node(0, "root")
        return MergeTree(kind, node_vertex, node_type, [float(vals[0])], parent,
                         root, [], (0, 0, 0.0), np.full(1, -1, np.int32), ranks)

    root_node = -1
    for m in minima:
        if comp_of[m] != -1:
            raise InternalConsistencyError("minimum visited before its own growth")
        c = m
        uf[c] = c
        heaps[c] = [rank_l[m]]
        from_node[c] = new_node(m, "leaf")
        region[c] = []
        rep[c] = m

        while True:
            heap = heaps[c]
            v = -1
            while heap:
                r = heapq.heappop(heap)
                w = order_l[r]
                if comp_of[w] == -1:
                    v = w
                    break
            if v == -1:
                # Heap exhausted: this component swept everything; finish root.
                root_vertex = order_l[n - 1]
                fn = from_node[c]
                if node_vertex[fn] == root_vertex:
                    # The last saddle sits at the top of the order and doubles
                    # as the root; its vertex joins the elder child edge.
                    node_type[fn] = "root"
                    root_node = fn
                    if c in last_child_edge:
                        edge_verts[last_child_edge[c]].extend(region[c])
                else:
                    root_node = new_node(root_vertex, "root")
                    parent[fn] = root_node
                    edge_verts[fn] = region[c]
                essential = (rep[c], root_vertex,
                             abs(float(vals[root_vertex]) - float(vals[rep[c]])))
                break

            rv = rank_l[v]
            blocked = False
            for w in nbrs[v]:
                if rank_l[w] < rv:
                    cw = comp_of[w]
                    if cw == -1 or find(cw) != c:
                        blocked = True
                        break
            if not blocked:
                comp_of[v] = c
                region[c].append(v)
                for w in nbrs[v]:
                    if comp_of[w] == -1:
                        heapq.heappush(heap, rank_l[w])
                continue

            # Arrival at a merge saddle candidate.
            arr = arrivals.setdefault(v, [])
            arr.append(c)
            ready = True
            present = set(arr)
            for w in nbrs[v]:
                if rank_l[w] < rv:
                    cw = comp_of[w]
                    if cw == -1 or find(cw) not in present:
                        ready = False
                        break
            if not ready:
                break  # suspend; another growth completes this saddle later

            # Completion: current component is the last (elder) arrival.
            del arrivals[v]
            sad = new_node(v, "saddle")
            elder_rank = rank_l[rep[c]]
            for rt in arr:
                fn = from_node[rt]
                parent[fn] = sad
                edge_verts[fn] = region[rt]
                if rt != c:
                    if rank_l[rep[rt]] < elder_rank:
                        raise InternalConsistencyError(
                            "saddle completed by a non-elder branch")
                    pairs.append((rep[rt], v,
                                  abs(float(vals[v]) - float(vals[rep[rt]]))))
            last_child_edge[c] = from_node[c]
            # Merge heaps smaller-into-larger, union components onto c.
            merged = heaps[c]
            for rt in arr:
                if rt == c:
                    continue
                h = heaps[rt]
                if len(h) > len(merged):
                    merged, h = h, merged
                for entry in h:
                    heapq.heappush(merged, entry)
            for rt in arr:
                uf[rt] = c
                if rt != c:
                    del heaps[rt], from_node[rt], region[rt], rep[rt]
            heaps[c] = merged
            comp_of[v] = c
            from_node[c] = sad
            region[c] = [v]
            for w in nbrs[v]:
                if comp_of[w] == -1:
                    heapq.heappush(merged, rank_l[w])

        if root_node != -1:
            break

    if root_node == -1:
        raise InternalConsistencyError("sweep ended without reaching the root")

    edge_of = np.full(n, -1, dtype=np.int32)
    for eid, verts in edge_verts.items():
        edge_of[verts] = eid
    node_value = [float(vals[v]) for v in node_vertex]
    return MergeTree(kind, node_vertex, node_type, node_value, parent,
                     root_node, pairs, essential, edge_of, ranks)


def simplify_tree(tree: MergeTree, eps_abs: float) -> MergeTree:
    """Remove leaf branches with persistence strictly below eps_abs.

    Degree-2 saddles left behind are contracted away; segmentation of removed
    branches is folded into the absorbing edge. The essential branch survives
    any threshold.
    """
    if eps_abs < 0:
        raise ValueError("persistence threshold must be nonnegative")
    rank_l = tree.ranks
    n_nodes = tree.n_nodes
    parent = list(tree.parent)
    children: list[set[int]] = [set() for _ in range(n_nodes)]
    for nid, p in enumerate(parent):
        if p >= 0:
            children[p].add(nid)
    alive = [True] * n_nodes
    everts: dict[int, list[int]] = {nid: [] for nid in range(n_nodes)}
    flat = tree.edge_of
    for v in np.nonzero(flat >= 0)[0].tolist():
        everts[int(flat[v])].append(v)

    node_of = {v: i for i, v in enumerate(tree.node_vertex)}

    # Strictly increasing persistence; at ties the higher-rank extremum is a
    # branch hanging off the lower one's path and must go first.
    cand = sorted(
        (p for p in tree.pairs if p[2] < eps_abs),
        key=lambda p: (p[2], -int(rank_l[p[0]])),
    )
    surviving = [p for p in tree.pairs if p[2] >= eps_abs]

    for ext, sad_vertex, _pers in cand:
        leaf = node_of[ext]
        if not alive[leaf] or children[leaf]:
            raise InternalConsistencyError("simplification order violated: not a leaf")
        p = parent[leaf]
        if tree.node_vertex[p] != sad_vertex:
            raise InternalConsistencyError(
                "leaf parent does not match its pair saddle during removal")
        children[p].discard(leaf)
        alive[leaf] = False
        # Absorb the removed edge into the saddle's outgoing edge, or into a
        # child edge when the saddle is the root.
        if parent[p] >= 0:
            everts[p].extend(everts[leaf])
        else:
            absorb = min(children[p], key=lambda nid: rank_l[tree.node_vertex[nid]])
            everts[absorb].extend(everts[leaf])
        everts[leaf] = []
        # Contract p when it degenerates to a single child (root is kept).
        if parent[p] >= 0 and len(children[p]) == 1:
            only = next(iter(children[p]))
            everts[only].extend(everts[p])
            everts[p] = []
            q = parent[p]
            parent[only] = q
            children[q].discard(p)
            children[q].add(only)
            alive[p] = False
        elif not children[p]:
            raise InternalConsistencyError("saddle lost all children")

    remap = {}
    node_vertex, node_type, node_value, new_parent = [], [], [], []
    for nid in range(n_nodes):
        if alive[nid]:
            remap[nid] = len(node_vertex)
            node_vertex.append(tree.node_vertex[nid])
            node_type.append(tree.node_type[nid])
            node_value.append(tree.node_value[nid])
    for nid in range(n_nodes):
        if alive[nid]:
            p = parent[nid]
            new_parent.append(remap[p] if p >= 0 else -1)
    edge_of = np.full(tree.edge_of.size, -1, dtype=np.int32)
    for nid, verts in everts.items():
        if verts:
            if not alive[nid]:
                raise InternalConsistencyError("dead edge still owns vertices")
            edge_of[verts] = remap[nid]
    return MergeTree(tree.kind, node_vertex, node_type, node_value, new_parent,
                     remap[tree.root], surviving, tree.essential_pair, edge_of,
                     tree.ranks)


def dump_edges(tree: MergeTree) -> str:
    """Plain-text edge list for diffing against external tools."""
    lines = []
    for c, p in sorted(tree.edges(), key=lambda e: tree.node_vertex[e[0]]):
        lines.append(
            f"{tree.node_vertex[c]} {tree.node_vertex[p]} "
            f"{tree.node_value[c]!r} {tree.node_value[p]!r}"
        )
    return "\n".join(lines)
