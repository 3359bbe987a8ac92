"""Independent reference implementations used to cross-check the package.

These deliberately avoid the production code paths: the merge-tree oracle is
a union-find sweep over the sorted vertex list (no heaps, no growth
scheduling), the connectivity oracle enumerates tetrahedra explicitly, and
the spline oracle solves the natural-spline tridiagonal system directly.
"""

from __future__ import annotations

import itertools

import numpy as np

from topocomp import grid
from topocomp.mergetree import MergeTree


def canonical_tree(tree: MergeTree) -> dict:
    """Node-id-free view of a merge tree for equality comparison."""
    seg = {}
    for v, eid in enumerate(tree.edge_of.tolist()):
        seg[v] = tree.node_vertex[eid] if eid >= 0 else -1
    return {
        "nodes": {tree.node_vertex[i]: tree.node_type[i]
                  for i in range(tree.n_nodes)},
        "edges": {(tree.node_vertex[c], tree.node_vertex[p])
                  for c, p in tree.edges()},
        "pairs": sorted(tree.pairs),
        "essential": tree.essential_pair,
        "seg": seg,
    }


def sweep_merge_tree(fld: grid.ScalarField, kind: str) -> dict:
    """Union-find sorted-sweep merge tree, in canonical form."""
    order = grid.sort_order(fld, reverse=(kind == "split"))
    ranks = grid.rank_of(order)
    n = fld.size
    vals = fld.values

    if n == 1:
        return {"nodes": {0: "root"}, "edges": set(), "pairs": [],
                "essential": (0, 0, 0.0), "seg": {0: -1}}

    uf = list(range(n))

    def find(a):
        while uf[a] != a:
            uf[a] = uf[uf[a]]
            a = uf[a]
        return a

    nodes: dict[int, str] = {}
    edges: set[tuple[int, int]] = set()
    pairs: list[tuple[int, int, float]] = []
    seg = {v: -1 for v in range(n)}
    open_child: dict[int, int] = {}   # comp root -> child vertex of its open edge
    rep: dict[int, int] = {}          # comp root -> elder extremum vertex

    for pos in range(n):
        v = int(order[pos])
        lower_roots = []
        for w in grid.neighbors(v, fld):
            if ranks[w] < pos:
                r = find(w)
                if r not in lower_roots:
                    lower_roots.append(r)
        if not lower_roots:
            nodes[v] = "leaf"
            open_child[v] = v
            rep[v] = v
            seg[v] = v
        elif len(lower_roots) == 1:
            r = lower_roots[0]
            seg[v] = open_child[r]
            uf[v] = r
        else:
            elder = min(lower_roots, key=lambda r: ranks[rep[r]])
            for r in lower_roots:
                edges.add((open_child[r], v))
                if r != elder:
                    pairs.append(
                        (rep[r], v, abs(float(vals[v]) - float(vals[rep[r]]))))
            for r in lower_roots:
                uf[r] = elder
            uf[v] = elder
            if pos == n - 1:
                # Final saddle doubles as the root; its vertex joins the
                # elder child edge (mirrors the builder convention).
                nodes[v] = "root"
                seg[v] = open_child[elder]
            else:
                nodes[v] = "saddle"
                open_child[elder] = v
                seg[v] = v

    top = int(order[n - 1])
    if top not in nodes:
        nodes[top] = "root"
        r = find(top)
        edges.add((open_child[r], top))
        open_child[r] = top
    root_rep = rep[find(top)]
    essential = (root_rep, top, abs(float(vals[top]) - float(vals[root_rep])))
    return {"nodes": nodes, "edges": edges, "pairs": sorted(pairs),
            "essential": essential, "seg": seg}


def freudenthal_link(v: int, dims: tuple[int, int, int]) -> set[int]:
    """Neighbors of v from an explicit 6-tet decomposition of incident cubes.

    Each unit cube splits into 6 tetrahedra sharing the (0,0,0)-(1,1,1)
    diagonal, one per ordering of the three axis steps.
    """
    nx, ny, nz = dims
    i0 = v % nx
    j0 = (v // nx) % ny
    k0 = v // (nx * ny)
    link: set[int] = set()
    for ci, cj, ck in itertools.product((-1, 0), repeat=3):
        bi, bj, bk = i0 + ci, j0 + cj, k0 + ck
        if not (0 <= bi <= nx - 2 and 0 <= bj <= ny - 2 and 0 <= bk <= nz - 2):
            continue
        for perm in itertools.permutations(range(3)):
            pts = [(0, 0, 0)]
            cur = [0, 0, 0]
            for ax in perm:
                cur[ax] += 1
                pts.append(tuple(cur))
            tet = [(bi + di, bj + dj, bk + dk) for (di, dj, dk) in pts]
            if (i0, j0, k0) not in tet:
                continue
            for (ti, tj, tk) in tet:
                if (ti, tj, tk) != (i0, j0, k0):
                    link.add(ti + nx * (tj + ny * tk))
    if nx == 1 or ny == 1 or nz == 1:
        # No full cube exists along a degenerate axis; use the clipped offset
        # stencil restricted to the surviving axes as the reference.
        for di, dj, dk in grid.NEIGHBOR_OFFSETS:
            ii, jj, kk = i0 + di, j0 + dj, k0 + dk
            if 0 <= ii < nx and 0 <= jj < ny and 0 <= kk < nz:
                link.add(ii + nx * (jj + ny * kk))
    return link


def natural_spline_eval(xs: np.ndarray, ys: np.ndarray, xq: np.ndarray) -> np.ndarray:
    """Natural cubic spline through (xs, ys) evaluated at xq, via the
    second-derivative tridiagonal system solved densely."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    xq = np.asarray(xq, dtype=np.float64)
    n = xs.size
    if n == 1:
        return np.full(xq.size, ys[0], dtype=np.float64)
    if n == 2:
        t = (xq - xs[0]) / (xs[1] - xs[0])
        return ys[0] * (1 - t) + ys[1] * t
    h = np.diff(xs)
    rhs = np.zeros(n)
    rhs[1:-1] = 6.0 * ((ys[2:] - ys[1:-1]) / h[1:] - (ys[1:-1] - ys[:-2]) / h[:-1])
    m = np.zeros((n, n))
    m[0, 0] = 1.0
    m[-1, -1] = 1.0
    for i in range(1, n - 1):
        m[i, i - 1] = h[i - 1]
        m[i, i] = 2.0 * (h[i - 1] + h[i])
        m[i, i + 1] = h[i]
    sec = np.linalg.solve(m, rhs)
    out = np.empty(xq.size)
    idx = np.clip(np.searchsorted(xs, xq, side="right") - 1, 0, n - 2)
    for q, i in enumerate(idx):
        a, b = xs[i], xs[i + 1]
        hh = b - a
        t = xq[q]
        out[q] = (sec[i] * (b - t) ** 3 / (6 * hh)
                  + sec[i + 1] * (t - a) ** 3 / (6 * hh)
                  + (ys[i] / hh - sec[i] * hh / 6) * (b - t)
                  + (ys[i + 1] / hh - sec[i + 1] * hh / 6) * (t - a))
    return out


def wasserstein_by_permutation(d1, d2, q) -> float:
    """Exact diagram distance by exhausting all point/projection bijections."""
    n, m = len(d1), len(d2)
    size = n + m
    if size == 0:
        return 0.0

    def diag_cost(p):
        return abs(p[1] - p[0]) / 2.0

    inf = float("inf")
    cost = [[inf] * size for _ in range(size)]
    for i in range(n):
        for j in range(m):
            cost[i][j] = max(abs(d1[i][0] - d2[j][0]), abs(d1[i][1] - d2[j][1]))
        cost[i][m + i] = diag_cost(d1[i])
    for j in range(m):
        cost[n + j][j] = diag_cost(d2[j])
        for i in range(n):
            cost[n + j][m + i] = 0.0
    best = inf
    for perm in itertools.permutations(range(size)):
        total = 0.0
        ok = True
        if q == float("inf"):
            worst = 0.0
            for r in range(size):
                c = cost[r][perm[r]]
                if c == inf:
                    ok = False
                    break
                worst = max(worst, c)
            if ok:
                best = min(best, worst)
        else:
            for r in range(size):
                c = cost[r][perm[r]]
                if c == inf:
                    ok = False
                    break
                total += c ** q
            if ok:
                best = min(best, total ** (1.0 / q))
    return best
