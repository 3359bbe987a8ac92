"""3D rectilinear scalar fields, vertex connectivity, and the strict total vertex order.

Vertices are addressed by a flat index in Fortran (x-fastest) order:
``idx = i + nx * (j + ny * k)``. Values are held as float64 internally
regardless of the input precision; the source precision is recorded so
RAW round trips can restore it.

Connectivity is the Freudenthal tetrahedralization of the cube grid
(consistent 6-tet split of every cube along the +(1,1,1) diagonal).
Each interior vertex has 14 link neighbors: 6 axis, 6 face-diagonal,
2 body-diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFieldError

CONNECTIVITY_ID = "freudenthal-6tet-xyz"

# Offsets of the Freudenthal link, fixed order. The diagonal set is the
# positive corner offsets of the unit cube and their negations.
NEIGHBOR_OFFSETS = (
    (1, 0, 0), (-1, 0, 0),
    (0, 1, 0), (0, -1, 0),
    (0, 0, 1), (0, 0, -1),
    (1, 1, 0), (-1, -1, 0),
    (1, 0, 1), (-1, 0, -1),
    (0, 1, 1), (0, -1, -1),
    (1, 1, 1), (-1, -1, -1),
)


@dataclass
class ScalarField:
    """Immutable 3D scalar field on a rectilinear grid.

    values is the flat float64 array in Fortran order; dims = (nx, ny, nz).
    Treat instances as read-only: derived caches assume the values never change.
    """

    dims: tuple[int, int, int]
    values: np.ndarray
    source_precision: str = "f64"  # "f32" | "f64"
    range_min: float = field(init=False)
    range_max: float = field(init=False)

    def __post_init__(self):
        nx, ny, nz = self.dims
        if nx < 1 or ny < 1 or nz < 1:
            raise ValueError(f"dims must be positive, got {self.dims}")
        self.values = np.ascontiguousarray(self.values, dtype=np.float64).ravel()
        if self.values.size != nx * ny * nz:
            raise ValueError(
                f"value count {self.values.size} does not match dims {self.dims}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")
        if self.source_precision not in ("f32", "f64"):
            raise ValueError(f"unknown precision {self.source_precision!r}")
        self.range_min = float(self.values.min())
        self.range_max = float(self.values.max())

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def value_range(self) -> float:
        return self.range_max - self.range_min

    def index_of(self, i: int, j: int, k: int) -> int:
        nx, ny, _ = self.dims
        return i + nx * (j + ny * k)

    def coords_of(self, v: int) -> tuple[int, int, int]:
        nx, ny, _ = self.dims
        return v % nx, (v // nx) % ny, v // (nx * ny)

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.dims, values, self.source_precision)


def total_order_less(a: int, b: int, fld: ScalarField) -> bool:
    """Strict total order on vertices: lexicographic on (value, flat index)."""
    n = fld.size
    if not (0 <= a < n) or not (0 <= b < n):
        raise ValueError(f"vertex out of range for field of size {n}: {a}, {b}")
    va, vb = fld.values[a], fld.values[b]
    if va != vb:
        return bool(va < vb)
    return a < b


def neighbors(v: int, fld: ScalarField) -> list[int]:
    """Freudenthal link of v, clipped at the boundary, in fixed offset order."""
    if not (0 <= v < fld.size):
        raise ValueError(f"vertex {v} out of range for field of size {fld.size}")
    nx, ny, nz = fld.dims
    i, j, k = fld.coords_of(v)
    out = []
    for di, dj, dk in NEIGHBOR_OFFSETS:
        ii, jj, kk = i + di, j + dj, k + dk
        if 0 <= ii < nx and 0 <= jj < ny and 0 <= kk < nz:
            out.append(ii + nx * (jj + ny * kk))
    return out


def neighbor_table(dims: tuple[int, int, int]) -> np.ndarray:
    """(n, 14) int32 table of link neighbors, -1 where clipped at the boundary."""
    nx, ny, nz = dims
    n = nx * ny * nz
    idx = np.arange(n, dtype=np.int64)
    i = idx % nx
    j = (idx // nx) % ny
    k = idx // (nx * ny)
    table = np.full((n, len(NEIGHBOR_OFFSETS)), -1, dtype=np.int32)
    for c, (di, dj, dk) in enumerate(NEIGHBOR_OFFSETS):
        ii, jj, kk = i + di, j + dj, k + dk
        ok = (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny) & (kk >= 0) & (kk < nz)
        table[ok, c] = (ii + nx * (jj + ny * kk))[ok]
    return table


def sort_order(fld: ScalarField, reverse: bool = False) -> np.ndarray:
    """Vertices sorted by the total order; reverse=True gives the exact inverse.

    A stable argsort on values breaks ties by ascending index, which is the
    total order. Reversing the array flips both the value and the index
    tie-break, so the reversed order is the mirror total order used for
    split trees.
    """
    order = np.argsort(fld.values, kind="stable")
    return order[::-1].copy() if reverse else order


def rank_of(order: np.ndarray) -> np.ndarray:
    ranks = np.empty(order.size, dtype=np.int64)
    ranks[order] = np.arange(order.size, dtype=np.int64)
    return ranks


def local_minima(ranks: np.ndarray, nbrs: np.ndarray) -> np.ndarray:
    """Vertices whose rank is below all link neighbors' ranks.

    With ranks from the reversed order this yields local maxima instead.
    """
    n = ranks.size
    nbr_ranks = np.where(nbrs >= 0, ranks[np.where(nbrs >= 0, nbrs, 0)], n)
    return np.nonzero(ranks < nbr_ranks.min(axis=1))[0]


def normalize(fld: ScalarField) -> ScalarField:
    """Affine map of the values onto [0, 1]."""
    span = fld.value_range
    if span <= 0.0:
        raise DegenerateFieldError("cannot normalize a constant field")
    vals = (fld.values - fld.range_min) / span
    return ScalarField(fld.dims, vals, fld.source_precision)


def read_raw(path, dims: tuple[int, int, int], precision: str = "f32") -> ScalarField:
    """Read a headerless little-endian RAW volume in Fortran order."""
    dtype = np.dtype("<f4") if precision == "f32" else np.dtype("<f8")
    data = np.fromfile(path, dtype=dtype)
    return ScalarField(dims, data.astype(np.float64), precision)


def write_raw(fld: ScalarField, path, precision: str | None = None) -> None:
    """Write a headerless little-endian RAW volume at the given precision."""
    prec = precision or fld.source_precision
    dtype = np.dtype("<f4") if prec == "f32" else np.dtype("<f8")
    fld.values.astype(dtype).tofile(path)
