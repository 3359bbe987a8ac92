"""Sequential Lorenzo prediction loops, jitted when numba is available.

The prediction feeds on already-reconstructed values, so the sweep is
inherently sequential; the jit makes full-size volumes practical.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is normally present
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn
        return deco


@njit(cache=True)
def encode_core(vals, nx, ny, nz, xi):
    n = vals.size
    rec = np.zeros(n, dtype=np.float64)
    codes = np.zeros(n, dtype=np.int64)
    override = np.zeros(n, dtype=np.uint8)
    width = 2.0 * xi
    v = 0
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                pred = 0.0
                if i > 0:
                    pred += rec[v - 1]
                if j > 0:
                    pred += rec[v - nx]
                if k > 0:
                    pred += rec[v - nx * ny]
                if i > 0 and j > 0:
                    pred -= rec[v - 1 - nx]
                if i > 0 and k > 0:
                    pred -= rec[v - 1 - nx * ny]
                if j > 0 and k > 0:
                    pred -= rec[v - nx - nx * ny]
                if i > 0 and j > 0 and k > 0:
                    pred += rec[v - 1 - nx - nx * ny]
                q = int(np.floor((vals[v] - pred) / width + 0.5))
                r = pred + q * width
                if abs(r - vals[v]) > xi or q > 2**30 or q < -(2**30):
                    override[v] = 1
                    rec[v] = vals[v]
                    codes[v] = 0
                else:
                    rec[v] = r
                    codes[v] = q
                v += 1
    return codes, override, rec


@njit(cache=True)
def decode_core(codes, override, exact, nx, ny, nz, xi):
    n = codes.size
    rec = np.zeros(n, dtype=np.float64)
    width = 2.0 * xi
    v = 0
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                if override[v] == 1:
                    rec[v] = exact[v]
                else:
                    pred = 0.0
                    if i > 0:
                        pred += rec[v - 1]
                    if j > 0:
                        pred += rec[v - nx]
                    if k > 0:
                        pred += rec[v - nx * ny]
                    if i > 0 and j > 0:
                        pred -= rec[v - 1 - nx]
                    if i > 0 and k > 0:
                        pred -= rec[v - 1 - nx * ny]
                    if j > 0 and k > 0:
                        pred -= rec[v - nx - nx * ny]
                    if i > 0 and j > 0 and k > 0:
                        pred += rec[v - 1 - nx - nx * ny]
                    rec[v] = pred + codes[v] * width
                v += 1
    return rec
