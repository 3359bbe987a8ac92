"""Variable-precision quantization of base-compressor residuals.

Each vertex stores an integer shift ``a`` at precision ``p``: the
reconstructed value is ``g + 2*xi*a / 2**p``. Starting at p=0 (plain
interval-of-2xi shifting), the precision is raised, halving the interval
width, until some shift lands inside the vertex's admissible [L, U]. Shifts
are chosen with minimal |a| to keep the code entropy low. A vertex still
unsolved past precision 10 is stored losslessly.

All candidate arithmetic is ordered so that the encoder and decoder compute
bit-identical values: the flattened code n = a * 2**(p_m - p) reconstructs
through g + 2*xi*n / 2**p_m, which differs from the per-point form only by
exact power-of-two scalings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_PRECISION = 10           # precision 11 means: store losslessly
SHIFT_CAP = 1 << 20          # |a| beyond this escalates precision instead
LOSSLESS_CODE = 1 << 62      # reserved symbol in flattened code streams


@dataclass
class QuantizationPlan:
    """Per-vertex shift/precision codes plus the lossless vertex mask."""

    a: np.ndarray          # int64 numerators, 0 where lossless
    p: np.ndarray          # int16 precisions, 0 where lossless
    lossless: np.ndarray   # bool
    mode: str              # "log" | "linear"

    @property
    def p_m(self) -> int:
        q = ~self.lossless
        return int(self.p[q].max()) if np.any(q) else 0

    def flatten(self) -> np.ndarray:
        """Single code per vertex: n = a * 2**(p_m - p), sentinel at lossless."""
        pm = self.p_m
        codes = self.a * (np.int64(1) << (pm - self.p.astype(np.int64)))
        codes[self.lossless] = LOSSLESS_CODE
        return codes

    def copy(self) -> "QuantizationPlan":
        return QuantizationPlan(self.a.copy(), self.p.copy(),
                                self.lossless.copy(), self.mode)


def _min_abs_shift(g: float, lo: float, up: float, step: float):
    """Smallest-|a| integer with lo <= g + a*step <= up, exact comparisons."""
    if up < lo or step <= 0.0:
        return None
    a_lo = int(np.ceil((lo - g) / step))
    for _ in range(4):
        if g + a_lo * step < lo:
            a_lo += 1
        elif g + (a_lo - 1) * step >= lo:
            a_lo -= 1
        else:
            break
    a_hi = int(np.floor((up - g) / step))
    for _ in range(4):
        if g + a_hi * step > up:
            a_hi -= 1
        elif g + (a_hi + 1) * step <= up:
            a_hi += 1
        else:
            break
    if a_lo > a_hi:
        return None
    if a_lo <= 0 <= a_hi:
        return 0
    a = a_lo if a_lo > 0 else a_hi
    if abs(a) > SHIFT_CAP:
        return None
    return a


def quantize_point(g: float, f: float, lo: float, up: float, xi_abs: float,
                   mode: str = "log"):
    """Quantize one vertex; returns (a, p) or None when it must be lossless.

    In linear mode only the fixed interval width xi (precision 1) is tried,
    mirroring single-pass linear-scaling quantization with a decreased
    interval size.
    """
    if xi_abs <= 0:
        raise ValueError("error bound must be positive")
    precisions = (1,) if mode == "linear" else range(MAX_PRECISION + 1)
    for p in precisions:
        step = (2.0 * xi_abs) / float(1 << p)
        a = _min_abs_shift(g, lo, up, step)
        if a is not None:
            return a, p
    return None


def reconstruct_point(g: float, n: int, p_m: int, xi_abs: float) -> float:
    """Decoder-side value for a flattened code."""
    return g + (2.0 * xi_abs * n) / float(1 << p_m)


def quantize_field(g: np.ndarray, f: np.ndarray, lower: np.ndarray,
                   upper: np.ndarray, lossless: np.ndarray, xi_abs: float,
                   mode: str = "log") -> QuantizationPlan:
    """Vectorized quantization of every non-lossless vertex."""
    n = g.size
    a_arr = np.zeros(n, dtype=np.int64)
    p_arr = np.zeros(n, dtype=np.int16)
    out_lossless = lossless.copy()
    todo = np.nonzero(~lossless)[0]
    precisions = (1,) if mode == "linear" else range(MAX_PRECISION + 1)
    for p in precisions:
        if todo.size == 0:
            break
        step = (2.0 * xi_abs) / float(1 << p)
        gg, lo, up = g[todo], lower[todo], upper[todo]
        a_lo = np.ceil((lo - gg) / step).astype(np.int64)
        for _ in range(4):
            a_lo += gg + a_lo * step < lo
            a_lo -= gg + (a_lo - 1) * step >= lo
        a_hi = np.floor((up - gg) / step).astype(np.int64)
        for _ in range(4):
            a_hi -= gg + a_hi * step > up
            a_hi += gg + (a_hi + 1) * step <= up
        a = np.where(a_lo > 0, a_lo, np.where(a_hi < 0, a_hi, 0))
        solved = (a_lo <= a_hi) & (np.abs(a) <= SHIFT_CAP)
        # exact admissibility of the chosen shifts (reject float-edge slips)
        cand = gg + a * step
        solved &= (cand >= lo) & (cand <= up)
        hit = todo[solved]
        a_arr[hit] = a[solved]
        p_arr[hit] = p
        todo = todo[~solved]
    out_lossless[todo] = True
    a_arr[out_lossless] = 0
    p_arr[out_lossless] = 0
    return QuantizationPlan(a_arr, p_arr, out_lossless, mode)


def reconstruct_field(g: np.ndarray, plan: QuantizationPlan, xi_abs: float,
                      exact: np.ndarray) -> np.ndarray:
    """Reconstructed field: quantized vertices from codes, lossless from exact."""
    pm = plan.p_m
    shift = plan.a * (np.int64(1) << (pm - plan.p.astype(np.int64)))
    out = g + (2.0 * xi_abs * shift) / float(1 << pm)
    out[plan.lossless] = exact[plan.lossless]
    return out


def requantize_subset(plan: QuantizationPlan, recon: np.ndarray,
                      g: np.ndarray, f: np.ndarray, lower: np.ndarray,
                      upper: np.ndarray, verts: np.ndarray,
                      xi_abs: float) -> int:
    """Re-quantize a vertex subset against tightened bounds, updating the
    plan and the reconstruction in place. Returns how many vertices became
    lossless."""
    verts = verts[~plan.lossless[verts]]
    if verts.size == 0:
        return 0
    sub = quantize_field(g[verts], f[verts], lower[verts], upper[verts],
                         np.zeros(verts.size, dtype=bool), xi_abs, plan.mode)
    plan.a[verts] = sub.a
    plan.p[verts] = sub.p
    plan.lossless[verts] = sub.lossless
    pm = int(sub.p[~sub.lossless].max()) if np.any(~sub.lossless) else 0
    shift = sub.a * (np.int64(1) << (pm - sub.p.astype(np.int64)))
    vals = g[verts] + (2.0 * xi_abs * shift) / float(1 << pm)
    vals[sub.lossless] = f[verts][sub.lossless]
    recon[verts] = vals
    return int(sub.lossless.sum())
