"""Progressive bound tightening until the reconstruction's merge trees match.

The detector grows the reconstruction's join tree one minimum at a time, in
decreasing value order. Each minimum resolves either to the simplified-tree
edge it creates (first retained saddle it reaches) or to nothing when its
branch persistence stays below the threshold. A resolution disagreeing with
the ground-truth tree is a false case: the admissible intervals of a region
around the offending edge are tightened by splitting the region's true value
range into 2^n equal-count intervals (n counts how often that extremum has
misbehaved), the region is re-quantized, and only growths whose territory
touches the changed region are rewound and re-run. The split tree is handled
the same way with the sweep order mirrored; corrections on one side
re-trigger verification of the other until a joint fixpoint, which is then
confirmed against from-scratch rebuilds.

The global extremum of each sweep is never grown: once every other branch is
verified, the remaining trunk is forced to be correct.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import grid
from .bounds import EDGE_MARGIN_FRACTION, BoundsField
from .contour import compare_trees
from .errors import InternalConsistencyError, TighteningLimitError
from .mergetree import MergeTree, build_merge_tree, simplify_tree, _neighbor_lists
from .quantize import QuantizationPlan, requantize_subset


@dataclass
class CorrectionRecord:
    index: int
    outer: int
    side: str
    kind: str            # fp | fn | fpfn | fp-as-fn
    extremum: int
    saddle: int
    iteration: int       # per-extremum occurrence count
    region_size: int
    intervals: int
    new_lossless: int


@dataclass
class _FalseCase:
    side: str
    kind: str                    # fp | fn | fpfn
    extremum: int
    saddle: int                  # detected f' saddle (fp) or gt saddle (fn)
    gt_saddle: int = -1          # set for fpfn
    fp_region: np.ndarray = None # f'-side branch region for fp kinds


class Tightener:
    """Owns the evolving reconstruction, bounds, and quantization plan."""

    def __init__(self, fld: grid.ScalarField, recon: np.ndarray,
                 bnd: BoundsField, plan: QuantizationPlan, g: np.ndarray,
                 eps_abs: float, xi_abs: float,
                 gt_join: MergeTree, gt_split: MergeTree,
                 growth_delay: int = 3, fp_to_fn_switch: int = 6,
                 correction_ceiling: int = 10 ** 6, max_outer: int = 50,
                 callback=None):
        self.fld = fld
        self.recon = recon
        self.bnd = bnd
        self.plan = plan
        self.g = g
        self.eps_abs = eps_abs
        self.xi_abs = xi_abs
        self.gt = {"join": gt_join, "split": gt_split}
        self.growth_delay = growth_delay
        self.fp_to_fn_switch = fp_to_fn_switch
        self.ceiling = correction_ceiling
        self.max_outer = max_outer
        self.callback = callback
        self.counters: dict[tuple[str, int], int] = {}
        self.trace: list[CorrectionRecord] = []
        self.total_corrections = 0
        self.outer_iterations = 0
        self.regrown_minima = 0

    # -- region assembly -------------------------------------------------

    def _dilate(self, verts: np.ndarray, layers: int) -> np.ndarray:
        if layers <= 0:
            return verts
        nx, ny, nz = self.fld.dims
        layers = min(layers, max(nx, ny, nz))  # saturated beyond the extent
        mask = np.zeros(self.fld.size, dtype=bool)
        mask[verts] = True
        mask = mask.reshape((nx, ny, nz), order="F")
        mask = ndimage.binary_dilation(
            mask, structure=np.ones((3, 3, 3), dtype=bool), iterations=layers)
        return np.nonzero(mask.ravel(order="F"))[0]

    def _gt_region(self, side: str, extremum: int, by_leaf: bool) -> np.ndarray:
        gt = self.gt[side]
        eid = gt.node_of(extremum) if by_leaf else int(gt.edge_of[extremum])
        return np.nonzero(gt.edge_of == eid)[0]

    def _assemble_region(self, case: _FalseCase, n_iter: int) -> tuple[np.ndarray, str]:
        layers = max(0, n_iter - self.growth_delay)
        parts = []
        kind = case.kind
        gt = self.gt[case.side]
        if kind in ("fp", "fpfn"):
            parts.append(case.fp_region)
            if layers > 0:
                # false positives only grow the region around their saddle
                parts.append(self._dilate(np.array([case.saddle]), layers))
        if kind == "fpfn":
            rn = self._gt_region(case.side, case.extremum, by_leaf=True)
            parts.append(self._dilate(rn, layers) if layers > 0 else rn)
        elif kind == "fn":
            rn = self._gt_region(case.side, case.extremum, by_leaf=True)
            parts.append(self._dilate(rn, layers) if layers > 0 else rn)
        elif kind == "fp" and n_iter >= self.fp_to_fn_switch:
            # a persistent false positive is handled like a false negative:
            # tighten the true-data region the extremum lives in
            kind = "fp-as-fn"
            rn = self._gt_region(case.side, case.extremum,
                                 by_leaf=gt.has_node(case.extremum)
                                 and gt.node_type[gt.node_of(case.extremum)] == "leaf")
            parts.append(self._dilate(rn, layers) if layers > 0 else rn)
        region = np.unique(np.concatenate([p for p in parts if p is not None]))
        return region, kind

    # -- bound tightening ------------------------------------------------

    def _tighten(self, region: np.ndarray, n_iter: int) -> int:
        f = self.fld.values
        sub = region[~self.bnd.lossless[region]]
        if sub.size == 0:
            return 0
        rvals = f[region]
        # 2^n equal-count intervals saturate at one point per interval
        k = 1 << min(n_iter, max(1, int(rvals.size).bit_length()))
        k = min(k, rvals.size) if rvals.size > 1 else 1
        srt = np.sort(rvals, kind="stable")
        cuts = srt[np.minimum((np.arange(1, k) * rvals.size) // k,
                              rvals.size - 1)]
        idx = np.searchsorted(cuts, f[sub], side="left")
        b_all = np.concatenate(([srt[0]], cuts, [srt[-1]]))
        lo = b_all[idx]
        hi = b_all[idx + 1]
        # Keep reconstructions strictly inside their interval: a value landing
        # exactly on a shared boundary would tie across interval classes and
        # the index tie-break could invert the true order indefinitely.
        margin = EDGE_MARGIN_FRACTION * (hi - lo)
        self.bnd.lower[sub] = np.maximum(self.bnd.lower[sub], lo + margin)
        self.bnd.upper[sub] = np.minimum(self.bnd.upper[sub], hi - margin)
        # Value classes with several members can never be separated by
        # value-based interval boundaries, and their reconstructed mutual
        # order need not follow the index tie-break of the true data. Past
        # the conservative first iterations, pin them to their exact value
        # (an interval emptied by an earlier margin goes lossless instead).
        if n_iter > self.growth_delay:
            uniq, counts = np.unique(rvals, return_counts=True)
            dup_vals = uniq[counts > 1]
            if dup_vals.size:
                dup = sub[np.isin(f[sub], dup_vals)]
                self.bnd.lower[dup] = np.maximum(self.bnd.lower[dup], f[dup])
                self.bnd.upper[dup] = np.minimum(self.bnd.upper[dup], f[dup])
        # An interval emptied by the intersection (value sat inside an edge
        # margin) simply fails quantization below and goes lossless.
        before = int(self.plan.lossless.sum())
        requantize_subset(self.plan, self.recon, self.g, f,
                          self.bnd.lower, self.bnd.upper, sub, self.xi_abs)
        new_lossless = int(self.plan.lossless.sum()) - before
        self.recon[self.plan.lossless] = f[self.plan.lossless]
        return new_lossless

    def _force_exact(self, verts: np.ndarray) -> int:
        """Store vertices losslessly (strongest monotone tightening)."""
        verts = np.asarray(verts, dtype=np.int64)
        verts = verts[~self.plan.lossless[verts]]
        if verts.size == 0:
            return 0
        f = self.fld.values
        self.bnd.lower[verts] = f[verts]
        self.bnd.upper[verts] = f[verts]
        self.bnd.lossless[verts] = True
        self.plan.lossless[verts] = True
        self.plan.a[verts] = 0
        self.plan.p[verts] = 0
        self.recon[verts] = f[verts]
        return int(verts.size)

    def apply_correction(self, case: _FalseCase) -> np.ndarray:
        self.total_corrections += 1
        if self.total_corrections > self.ceiling:
            raise TighteningLimitError(
                f"exceeded correction ceiling ({self.ceiling}); "
                f"last case: {case.kind} at extremum {case.extremum}")
        key = (case.side, case.extremum)
        n_iter = self.counters[key] = self.counters.get(key, 0) + 1
        region, kind = self._assemble_region(case, n_iter)
        lo_before = self.bnd.lower[region].copy()
        up_before = self.bnd.upper[region].copy()
        new_lossless = self._tighten(region, n_iter)
        # Interval splitting bottoms out at the data's own value resolution.
        # A pair whose persistence straddles the threshold inside that
        # resolution can then wiggle forever, so a correction that moved
        # nothing escalates to exact storage: first the offending pair,
        # then the whole region.
        if (new_lossless == 0
                and np.array_equal(lo_before, self.bnd.lower[region])
                and np.array_equal(up_before, self.bnd.upper[region])):
            forced = self._force_exact(np.array([case.extremum, case.saddle]))
            if forced == 0:
                forced = self._force_exact(region)
            new_lossless = forced
        # Invalidation must cover everything this correction wrote, pair
        # endpoints included (the saddle may lie outside the region).
        touched = np.unique(np.concatenate(
            [region, np.asarray([case.extremum, case.saddle], dtype=np.int64)]))
        self.trace.append(CorrectionRecord(
            self.total_corrections, self.outer_iterations, case.side, kind,
            case.extremum, case.saddle, n_iter, int(region.size),
            1 << n_iter, new_lossless))
        if self.callback is not None:
            self.callback(self, case, touched)
        return touched

    # -- driver ----------------------------------------------------------

    def run(self) -> dict:
        while True:
            self.outer_iterations += 1
            if self.outer_iterations > self.max_outer:
                raise TighteningLimitError("outer tightening loop did not settle")
            corrections = 0
            for side in ("join", "split"):
                eng = _SideEngine(self, side)
                corrections += eng.run()
                self.regrown_minima += eng.regrown
            if corrections == 0:
                rep_j, rep_s = self.final_reports()
                if rep_j.is_clean and rep_s.is_clean:
                    return {
                        "corrections": self.total_corrections,
                        "outer_iterations": self.outer_iterations,
                        "regrown_minima": self.regrown_minima,
                        "lossless": int(self.plan.lossless.sum()),
                    }
                raise TighteningLimitError(
                    "progressive sweeps are clean but rebuilt trees disagree: "
                    f"join {rep_j}, split {rep_s}")

    def final_reports(self):
        rfld = self.fld.with_values(self.recon)
        rep = []
        for side in ("join", "split"):
            cand = simplify_tree(build_merge_tree(rfld, side), self.eps_abs)
            rep.append(compare_trees(self.gt[side], cand))
        return rep[0], rep[1]


class _SideEngine:
    """One progressive detection sweep over the reconstruction, join or split."""

    def __init__(self, tight: Tightener, side: str):
        self.t = tight
        self.side = side
        gt = tight.gt[side]
        self.gt_leaf_saddle = {}
        elder = gt.essential_pair[0]
        for leaf, sad in gt.leaf_edges().items():
            if leaf != elder:
                self.gt_leaf_saddle[leaf] = sad
        self.nbrs = _neighbor_lists(tight.fld.dims)
        self.regrown = 0
        self._full_reset()

    # -- state (re)construction -------------------------------------------

    def _full_reset(self):
        n = self.t.fld.size
        self.comp_of = [-1] * n
        self.uf: dict[int, int] = {}
        self.heaps: dict[int, list] = {}
        self.rep: dict[int, int] = {}
        self.comp_verts: dict[int, list[int]] = {}
        self.comp_minima: dict[int, list[int]] = {}
        self.arrivals: dict[int, list[int]] = {}
        self.pairs_at: dict[int, list[tuple[int, float]]] = {}
        self.resolutions: dict[int, int | None] = {}
        self._rebuild_order()
        self._rebuild_pending()

    def _rebuild_order(self):
        recon = self.t.recon
        order = np.argsort(recon, kind="stable")
        if self.side == "split":
            order = order[::-1]
        self.order = order
        self.rank = grid.rank_of(order).tolist()
        nbr_table = grid.neighbor_table(self.t.fld.dims)
        ranks_arr = np.asarray(self.rank)
        self.minima_set = set(grid.local_minima(ranks_arr, nbr_table).tolist())
        self.global_min = int(order[0])

    def _rebuild_pending(self):
        self.pending = []
        for m in self.minima_set:
            if m == self.global_min or m in self.resolutions:
                continue
            if self.comp_of[m] != -1:
                continue
            heapq.heappush(self.pending, (-self.rank[m], m))

    def find(self, c: int) -> int:
        r = c
        while self.uf[r] != r:
            r = self.uf[r]
        while self.uf[c] != r:
            self.uf[c], c = r, self.uf[c]
        return r

    # -- main sweep --------------------------------------------------------

    def run(self) -> int:
        corrections = 0
        while True:
            case = self.next_case()
            if case is None:
                return corrections
            region = self.t.apply_correction(case)
            self.recompute_affected(region)
            corrections += 1

    def next_case(self):
        """Advance the sweep to its next false case (None when the side is
        clean). Resolutions of correctly predicted extrema accumulate."""
        while True:
            missing = [m for m in self.gt_leaf_saddle
                       if m not in self.minima_set]
            if missing:
                m = max(missing, key=lambda v: int(self.t.gt[self.side].ranks[v]))
                return _FalseCase(self.side, "fn", m, self.gt_leaf_saddle[m])
            m = self._next_pending()
            if m is None:
                return None
            res = self._grow_minimum(m)
            case = self._classify(m, res)
            if case is None:
                self.resolutions[m] = None if res[0] == "none" else res[1]
                continue
            return case

    def _next_pending(self):
        while self.pending:
            _, m = heapq.heappop(self.pending)
            if m in self.minima_set and self.comp_of[m] == -1 \
                    and m not in self.resolutions and m != self.global_min:
                return m
        return None

    def _classify(self, m: int, res):
        tag = res[0]
        if tag == "ooo":
            return _FalseCase(self.side, "fp", m, res[1], fp_region=res[2])
        saddle = res[1]
        gt_s = self.gt_leaf_saddle.get(m)
        if tag == "none":
            if gt_s is None:
                return None
            return _FalseCase(self.side, "fn", m, gt_s)
        if gt_s == saddle:
            return None
        if gt_s is None:
            return _FalseCase(self.side, "fp", m, saddle, fp_region=res[2])
        return _FalseCase(self.side, "fpfn", m, saddle, gt_saddle=gt_s,
                          fp_region=res[2])

    def _grow_minimum(self, m: int):
        """Grow one minimum to its resolution.

        Returns ("edge", saddle, region), ("none", None, region) or
        ("ooo", saddle, region) for an out-of-order arrival.
        """
        rank = self.rank
        nbrs = self.nbrs
        comp_of = self.comp_of
        recon = self.t.recon
        eps = self.t.eps_abs
        c = m
        self.uf[c] = c
        heap = [(rank[m], m)]
        self.heaps[c] = heap
        self.rep[c] = m
        verts: list[int] = []
        self.comp_verts[c] = verts
        self.comp_minima[c] = [m]
        resolved_state = "unset"
        resolved_saddle = None
        resolved_region = None

        while True:
            v = -1
            while heap:
                rv, w = heapq.heappop(heap)
                cw = comp_of[w]
                if cw == -1:
                    v = w
                    break
                if self.find(cw) != c:
                    # The frontier ran into territory grown in an earlier
                    # epoch (possible only after rewinds): out-of-order.
                    return ("ooo", w, np.asarray(verts, dtype=np.int64))
            if v == -1:
                raise InternalConsistencyError(
                    "non-trunk growth exhausted its frontier")
            rv = rank[v]
            blocked = False
            for w in nbrs[v]:
                if rank[w] < rv:
                    cw = comp_of[w]
                    if cw == -1 or self.find(cw) != c:
                        blocked = True
                        break
            if not blocked:
                comp_of[v] = c
                verts.append(v)
                for w in nbrs[v]:
                    if comp_of[w] == -1:
                        heapq.heappush(heap, (rank[w], w))
                continue

            arr = self.arrivals.setdefault(v, [])
            arr.append(c)
            present = set(arr)
            ready = True
            for w in nbrs[v]:
                if rank[w] < rv:
                    cw = comp_of[w]
                    if cw == -1 or self.find(cw) not in present:
                        ready = False
                        break
            prior = self.pairs_at.get(v, [])
            if not ready:
                if any(rank[r0] < rank[m] for r0, _ in prior):
                    return ("ooo", v, np.asarray(verts, dtype=np.int64))
                p = abs(float(recon[v]) - float(recon[m]))
                self.pairs_at.setdefault(v, []).append((m, p))
                if resolved_state == "unset":
                    if p >= eps:
                        return ("edge", v, np.asarray(verts, dtype=np.int64))
                    return ("none", None, np.asarray(verts, dtype=np.int64))
                return (resolved_state, resolved_saddle, resolved_region)

            # completion: this growth carries the elder extremum onward
            if any(rank[self.rep[r]] < rank[m] for r in arr if r != c):
                return ("ooo", v, np.asarray(verts, dtype=np.int64))
            if resolved_state == "unset" and any(p >= eps for _, p in prior):
                resolved_state = "edge"
                resolved_saddle = v
                resolved_region = np.asarray(verts, dtype=np.int64)
            del self.arrivals[v]
            merged = heap
            for r0 in arr:
                if r0 == c:
                    continue
                h = self.heaps[r0]
                if len(h) > len(merged):
                    merged, h = h, merged
                for entry in h:
                    heapq.heappush(merged, entry)
                verts_r = self.comp_verts[r0]
                verts.extend(verts_r)
                self.comp_minima[c].extend(self.comp_minima[r0])
                del self.heaps[r0], self.comp_verts[r0], self.comp_minima[r0]
                del self.rep[r0]
            for r0 in arr:
                self.uf[r0] = c
            heap = merged
            self.heaps[c] = merged
            comp_of[v] = c
            verts.append(v)
            for w in nbrs[v]:
                if comp_of[w] == -1:
                    heapq.heappush(merged, (rank[w], w))

    # -- incremental invalidation -------------------------------------------

    def _rewind_roots(self, roots, seen: set[int]) -> list[int]:
        """Tear down components (plus growths suspended on their vertices);
        returns the minima they released."""
        rewound_minima: list[int] = []
        stack = sorted(roots)
        while stack:
            r = stack.pop()
            if r in seen or r not in self.comp_verts:
                continue
            seen.add(r)
            for v in self.comp_verts[r]:
                self.comp_of[v] = -1
                self.pairs_at.pop(v, None)
                for r2 in self.arrivals.pop(v, ()):
                    stack.append(self.find(r2))
            rewound_minima.extend(self.comp_minima[r])
            del self.comp_verts[r], self.comp_minima[r]
            del self.heaps[r], self.rep[r]
        return rewound_minima

    def recompute_affected(self, region: np.ndarray) -> list[int]:
        """Rewind every growth whose decisions may depend on the changed
        region (the region itself plus its link neighborhood), then roll the
        sweep cursor back so the surviving state is exactly what an in-order
        run would have produced. Refreshes orders, heaps, and the pending
        queue; returns the re-queued minima."""
        affected = set(region.tolist())
        for v in region.tolist():
            affected.update(self.nbrs[v])

        to_rewind: set[int] = set()
        for v in affected:
            cw = self.comp_of[v]
            if cw != -1:
                to_rewind.add(self.find(cw))
            for r0 in self.arrivals.get(v, ()):  # growths suspended here
                to_rewind.add(self.find(r0))

        seen: set[int] = set()
        rewound_minima = self._rewind_roots(to_rewind, seen)
        self._rebuild_order()

        # Cursor rollback: any surviving component whose representative lies
        # below a pending minimum was grown out of order relative to the
        # sweep that will now resume; replay it so the state matches a fresh
        # prefix run. Unaffected minima re-derive identical resolutions.
        rank = self.rank
        while True:
            for m in rewound_minima:
                self.resolutions.pop(m, None)
            pending_ranks = [rank[m] for m in self.minima_set
                             if m != self.global_min
                             and m not in self.resolutions
                             and self.comp_of[m] == -1]
            if not pending_ranks:
                break
            cursor = max(pending_ranks)
            victims = [r for r, rep in self.rep.items() if rank[rep] < cursor]
            if not victims:
                break
            rewound_minima += self._rewind_roots(victims, seen)

        gone = set(rewound_minima)
        for v, arr in list(self.arrivals.items()):
            kept = [r0 for r0 in arr if r0 not in seen]
            if kept:
                self.arrivals[v] = kept
            else:
                del self.arrivals[v]
        for v, prs in list(self.pairs_at.items()):
            kept = [(r0, p) for r0, p in prs if r0 not in gone]
            if kept:
                self.pairs_at[v] = kept
            else:
                del self.pairs_at[v]
        for m in rewound_minima:
            self.resolutions.pop(m, None)

        # Heap histories cannot be patched across rank changes; the frontier
        # of an in-order growth is exactly the set of vertices adjacent to
        # its region that it does not own, so rebuild each heap from that.
        nbrs = self.nbrs
        comp_of = self.comp_of
        for r0, owned in self.comp_verts.items():
            root = self.find(r0)
            frontier = set()
            for v in owned:
                for w in nbrs[v]:
                    cw = comp_of[w]
                    if cw == -1 or self.find(cw) != root:
                        frontier.add(w)
            h = [(rank[w], w) for w in frontier]
            heapq.heapify(h)
            self.heaps[r0] = h
        self._rebuild_pending()
        self.regrown += len(rewound_minima)
        return sorted(gone)


def progressive_fix(fld: grid.ScalarField, recon: np.ndarray,
                    bnd: BoundsField, plan: QuantizationPlan, g: np.ndarray,
                    eps_abs: float, xi_abs: float,
                    gt_join: MergeTree, gt_split: MergeTree, **knobs):
    """Tighten bounds and re-quantize until both simplified merge trees of
    the reconstruction equal the ground-truth ones. Mutates and returns
    (recon, plan) along with run statistics."""
    t = Tightener(fld, recon, bnd, plan, g, eps_abs, xi_abs,
                  gt_join, gt_split, **knobs)
    stats = t.run()
    stats["trace"] = t.trace
    return recon, plan, stats
