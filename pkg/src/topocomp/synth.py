"""Deterministic synthetic volumes for testing and benchmarking."""

from __future__ import annotations

import numpy as np

from .grid import ScalarField

KINDS = ("gaussians", "trig", "noise", "ramp")


def make_field(kind: str, dims: tuple[int, int, int], seed: int = 0,
               count: int = 2, precision: str = "f64") -> ScalarField:
    nx, ny, nz = dims
    if kind == "ramp":
        i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz),
                              indexing="ij")
        vals = (i + 2 * j + 4 * k).astype(np.float64)
    elif kind == "noise":
        rng = np.random.default_rng(seed)
        vals = rng.random((nx, ny, nz))
    elif kind == "trig":
        rng = np.random.default_rng(seed)
        fx, fy, fz = rng.integers(1, 4, size=3)
        px, py, pz = rng.random(3) * 2 * np.pi
        x = np.linspace(0, 2 * np.pi, nx)
        y = np.linspace(0, 2 * np.pi, ny)
        z = np.linspace(0, 2 * np.pi, nz)
        xx, yy, zz = np.meshgrid(x, y, z, indexing="ij")
        vals = (np.sin(fx * xx + px) * np.sin(fy * yy + py)
                * np.sin(fz * zz + pz))
    elif kind == "gaussians":
        vals = _gaussians(dims, seed, count)
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}")
    if precision == "f32":
        vals = vals.astype(np.float32).astype(np.float64)
    return ScalarField(dims, np.ascontiguousarray(vals).ravel(order="F"),
                       precision)


def _gaussians(dims, seed: int, count: int) -> np.ndarray:
    """Sum of well-separated anisotropic bumps with distinct amplitudes.

    Centers are drawn from a jittered coarse lattice so that every bump
    produces its own persistent maximum.
    """
    if count < 1:
        raise ValueError("need at least one bump")
    nx, ny, nz = dims
    rng = np.random.default_rng(seed)
    side = int(np.ceil(count ** (1 / 3)))
    while side ** 3 < count:
        side += 1
    cells = [(a, b, c) for a in range(side) for b in range(side)
             for c in range(side)]
    rng.shuffle(cells)
    cells = cells[:count]
    cw = np.array([nx, ny, nz], dtype=np.float64) / side
    sigma = max(1.5, float(cw.min()) / 5.0)
    i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz),
                          indexing="ij")
    vals = np.zeros(dims, dtype=np.float64)
    amps = 0.6 + 0.4 * rng.random(count)
    for (a, b, c), amp in zip(cells, amps):
        center = (np.array([a, b, c]) + 0.35 + 0.3 * rng.random(3)) * cw
        d2 = ((i - center[0]) ** 2 + (j - center[1]) ** 2
              + (k - center[2]) ** 2)
        vals += amp * np.exp(-d2 / (2.0 * sigma * sigma))
    return vals
