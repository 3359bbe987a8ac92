"""Evaluation metrics: PSNR, compression ratio/bit-rate, diagram distances.

Diagram distances are solved exactly (optimal assignment over the points plus
their diagonal projections) rather than approximately; a size cap keeps the
exact solve at desk scale and is enforced explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import UnsupportedSizeError
from .grid import ScalarField
from .mergetree import MergeTree, persistence_pairs

EXACT_DISTANCE_CAP = 64
DIAGRAM_NOISE_FLOOR = 1.5e-6  # fraction of range dropped before distances


@dataclass
class PersistenceDiagram:
    points: np.ndarray  # (k, 2) rows of (birth, death), death >= birth

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if pts.size and np.any(pts[:, 1] < pts[:, 0]):
            raise ValueError("diagram points must have death >= birth")
        self.points = pts

    def __len__(self) -> int:
        return len(self.points)

    def simplified(self, threshold: float) -> "PersistenceDiagram":
        if len(self.points) == 0:
            return PersistenceDiagram(self.points)
        keep = (self.points[:, 1] - self.points[:, 0]) >= threshold
        return PersistenceDiagram(self.points[keep])


def psnr(f: ScalarField, recon: np.ndarray) -> float:
    """10 log10(range^2 / mse); +inf when the reconstruction is exact."""
    span = f.value_range
    if span <= 0:
        raise ValueError("PSNR undefined for a constant field")
    diff = f.values - np.asarray(recon, dtype=np.float64).ravel()
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(span * span / mse)


def ratio_and_bitrate(input_bytes: int, archive_bytes: int,
                      precision: str) -> tuple[float, float]:
    if archive_bytes <= 0:
        raise ValueError("archive size must be positive")
    ratio = input_bytes / archive_bytes
    bits = 32.0 if precision == "f32" else 64.0
    return ratio, bits / ratio


def diagram_from_tree(tree) -> PersistenceDiagram:
    """Diagram of a merge tree, or of a (join, split) pair combined.

    One point per extremum-saddle pair (ordered to birth <= death); the
    essential pair spans the full value range, so its death is the range max.
    """
    if isinstance(tree, MergeTree):
        trees = [tree]
    else:
        trees = list(tree)
    pts = []
    essentials = set()
    for t in trees:
        vals = {t.node_vertex[i]: t.node_value[i] for i in range(t.n_nodes)}
        for ext, sad, _pers in t.pairs:
            a, b = vals[ext], vals[sad]
            pts.append((min(a, b), max(a, b)))
        e_ext, e_root, _ = t.essential_pair
        essentials.add((min(vals[e_ext], vals[e_root]),
                        max(vals[e_ext], vals[e_root])))
    pts.extend(sorted(essentials))
    return PersistenceDiagram(np.array(pts, dtype=np.float64).reshape(-1, 2))


def _check_cap(d1, d2, cap):
    if len(d1) > cap or len(d2) > cap:
        raise UnsupportedSizeError(
            f"diagram exceeds the exact-distance cap of {cap} points")


def _cost_matrix(p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Assignment costs over points plus diagonal projections (inf forbidden)."""
    n, m = len(p1), len(p2)
    size = n + m
    cost = np.full((size, size), np.inf)
    if n and m:
        cost[:n, :m] = np.max(
            np.abs(p1[:, None, :] - p2[None, :, :]), axis=2)
    if n:
        cost[np.arange(n), m + np.arange(n)] = (p1[:, 1] - p1[:, 0]) / 2.0
    if m:
        cost[n + np.arange(m), np.arange(m)] = (p2[:, 1] - p2[:, 0]) / 2.0
    cost[n:, m:] = 0.0
    return cost


def wasserstein(d1: PersistenceDiagram, d2: PersistenceDiagram, q: float = 2.0,
                cap: int = EXACT_DISTANCE_CAP) -> float:
    """Exact q-Wasserstein distance between diagrams (q = inf for bottleneck)."""
    _check_cap(d1, d2, cap)
    if q == float("inf"):
        return bottleneck(d1, d2, cap=cap)
    if q < 1:
        raise ValueError("q must be >= 1")
    if len(d1) == 0 and len(d2) == 0:
        return 0.0
    cost = _cost_matrix(d1.points, d2.points)
    big = np.nanmax(np.where(np.isinf(cost), np.nan, cost)) + 1.0
    work = np.where(np.isinf(cost), (big ** q) * cost.shape[0] + 1.0, cost ** q)
    rows, cols = linear_sum_assignment(work)
    total = cost[rows, cols]
    if np.any(np.isinf(total)):
        raise RuntimeError("assignment chose a forbidden pairing")
    return float(np.sum(total ** q) ** (1.0 / q))


def bottleneck(d1: PersistenceDiagram, d2: PersistenceDiagram,
               cap: int = EXACT_DISTANCE_CAP) -> float:
    """Exact bottleneck distance via threshold bisection on the cost matrix."""
    _check_cap(d1, d2, cap)
    if len(d1) == 0 and len(d2) == 0:
        return 0.0
    cost = _cost_matrix(d1.points, d2.points)
    finite = np.unique(cost[np.isfinite(cost)])

    def feasible(t: float) -> bool:
        mask = cost <= t
        graph = csr_matrix(mask)
        match = maximum_bipartite_matching(graph, perm_type="column")
        return int((match >= 0).sum()) == cost.shape[0]

    lo, hi = 0, len(finite) - 1
    if feasible(finite[0]):
        return float(finite[0])
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if feasible(finite[mid]):
            hi = mid
        else:
            lo = mid
    return float(finite[hi])


def flat_report(metrics: dict) -> str:
    """key=value lines, deterministic order, nested keys dotted."""
    lines = []

    def emit(prefix, obj):
        if isinstance(obj, dict):
            for k in sorted(obj):
                emit(f"{prefix}{k}.", obj[k]) if isinstance(obj[k], dict) \
                    else emit(f"{prefix}{k}", obj[k])
        else:
            lines.append(f"{prefix}={obj}")

    emit("", metrics)
    return "\n".join(lines) + "\n"
