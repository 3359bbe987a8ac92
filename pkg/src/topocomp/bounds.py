"""Per-vertex admissible value intervals derived from the simplified contour tree.

Every vertex that is not a contour-tree node receives the interval spanned by
its contour edge, pulled in by a small margin so reconstructed values can
never collide with critical values, then clamped to the global error bound.
Contour-tree nodes are stored losslessly, as are the rare vertices whose
interval degenerates (value ties with an edge endpoint, or a zero-span edge).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contour import ContourTree
from .grid import ScalarField

EDGE_MARGIN_FRACTION = 1e-5  # fraction of the edge span kept clear at each end


@dataclass
class BoundsField:
    """Lower/upper admissible values per vertex plus the lossless vertex set."""

    lower: np.ndarray
    upper: np.ndarray
    lossless: np.ndarray  # bool mask

    def copy(self) -> "BoundsField":
        return BoundsField(self.lower.copy(), self.upper.copy(),
                           self.lossless.copy())


def initial_bounds(fld: ScalarField, ct: ContourTree, xi_abs: float) -> BoundsField:
    """Interval [L, U] per vertex from the contour-edge spans, clamped to xi.

    Vertices are pushed to the lossless set when they are contour-tree nodes,
    when their spanning edge is degenerate, or when the margin and the clamp
    leave an empty interval. The interval need not contain the true value
    (the margin intentionally excludes values hugging a critical level);
    every reconstruction inside it still respects the error bound.
    """
    if xi_abs <= 0:
        raise ValueError("error bound must be positive")
    n = fld.size
    vals = fld.values
    lower = np.empty(n, dtype=np.float64)
    upper = np.empty(n, dtype=np.float64)
    lossless = np.zeros(n, dtype=bool)
    lossless[ct.node_vertex] = True

    seg = ct.segmentation
    quantized = ~lossless
    if np.any(seg[quantized] < 0):
        from .errors import InternalConsistencyError
        raise InternalConsistencyError("non-node vertex without a spanning edge")

    edge_lo = np.array([min(vals[a], vals[b]) for a, b in ct.edges],
                       dtype=np.float64) if ct.edges else np.zeros(0)
    edge_hi = np.array([max(vals[a], vals[b]) for a, b in ct.edges],
                       dtype=np.float64) if ct.edges else np.zeros(0)

    idx = np.nonzero(quantized)[0]
    e = seg[idx]
    span = edge_hi[e] - edge_lo[e]
    margin = EDGE_MARGIN_FRACTION * span
    lo = edge_lo[e] + margin
    hi = edge_hi[e] - margin
    # conservative clamp: rounding of value +- xi must never let a
    # reconstruction overshoot the bound even by one ulp
    lo_cap = vals[idx] - xi_abs
    for _ in range(2):
        over = (vals[idx] - lo_cap) > xi_abs
        lo_cap[over] = np.nextafter(lo_cap[over], np.inf)
    hi_cap = vals[idx] + xi_abs
    for _ in range(2):
        over = (hi_cap - vals[idx]) > xi_abs
        hi_cap[over] = np.nextafter(hi_cap[over], -np.inf)
    lo = np.maximum(lo, lo_cap)
    hi = np.minimum(hi, hi_cap)
    lower[idx] = lo
    upper[idx] = hi

    # The margins may push the interval off the true value (that is their
    # job near critical values); only a degenerate or empty interval forces
    # exact storage.
    bad = (span <= 0.0) | (lo > hi)
    lossless[idx[bad]] = True

    lower[lossless] = vals[lossless]
    upper[lossless] = vals[lossless]
    return BoundsField(lower, upper, lossless)


def width_stats(bnd: BoundsField) -> dict:
    """Min/mean/max interval width over quantized vertices, lossless count."""
    q = ~bnd.lossless
    widths = bnd.upper[q] - bnd.lower[q]
    if widths.size == 0:
        return {"min_width": 0.0, "mean_width": 0.0, "max_width": 0.0,
                "lossless_count": int(bnd.lossless.sum())}
    return {
        "min_width": float(widths.min()),
        "mean_width": float(widths.mean()),
        "max_width": float(widths.max()),
        "lossless_count": int(bnd.lossless.sum()),
    }
