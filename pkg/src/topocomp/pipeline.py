"""End-to-end compression, decompression, and verification.

Compression stages: compute the simplified ground-truth trees, derive
per-vertex admissible intervals, run the base compressor, quantize the
intermediate data into those intervals, progressively tighten until the
reconstruction's simplified merge trees match the ground truth, and pack
everything into the archive. Verification decompresses and rebuilds both
simplified contour trees from scratch, independent of any compressor state.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import archive as arch
from . import basecomp, metrics
from .bounds import BoundsField, initial_bounds, width_stats
from .contour import combine, compare_trees
from .errors import DegenerateFieldError
from .grid import CONNECTIVITY_ID, ScalarField
from .mergetree import build_merge_tree, simplify_tree
from .quantize import QuantizationPlan, quantize_field, reconstruct_field
from .tighten import Tightener

DEFAULT_EPS = 0.04
DEFAULT_XI = 0.012
DEFAULT_CSI_SCALE = 7


@dataclass
class GroundTruth:
    """Simplified trees of one field at one threshold, reusable across runs."""
    join: object
    split: object
    ct: object
    eps_abs: float


def ground_truth(fld: ScalarField, eps_abs: float,
                 segmentation: bool = True) -> GroundTruth:
    jt = simplify_tree(build_merge_tree(fld, "join"), eps_abs)
    st = simplify_tree(build_merge_tree(fld, "split"), eps_abs)
    ct = combine(jt, st, fld, compute_segmentation=segmentation)
    return GroundTruth(jt, st, ct, eps_abs)


@dataclass
class CompressResult:
    blob: bytes
    recon: ScalarField
    report: dict


def _base_compressor(base_id: str, base_params: dict | None, xi_abs: float):
    params = dict(base_params or {})
    if base_id == "lorenzo":
        params.setdefault("xi_abs", xi_abs)
    if base_id == "csi":
        params.setdefault("s", DEFAULT_CSI_SCALE)
    return basecomp.make_compressor(base_id, params)


def compress(fld: ScalarField, eps: float = DEFAULT_EPS, xi: float = DEFAULT_XI,
             base_id: str = "csi", base_params: dict | None = None,
             mode: str = "log", augment: bool = True, outer: str = "lzma",
             gt: GroundTruth | None = None, tighten_knobs: dict | None = None,
             callback=None) -> CompressResult:
    if xi <= 0:
        raise ValueError("error bound fraction must be positive")
    if eps < 0:
        raise ValueError("persistence threshold must be nonnegative")
    if mode not in ("log", "linear"):
        raise ValueError(f"unknown quantization mode {mode!r}")
    span = fld.value_range
    if span <= 0:
        raise DegenerateFieldError("cannot compress a constant field")
    eps_abs = eps * span
    xi_abs = xi * span
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    comp = _base_compressor(base_id, base_params, xi_abs)
    payload = comp.compress(fld)
    g_field = comp.decompress(payload, fld.dims)
    g = g_field.values
    timings["bc"] = time.perf_counter() - t0

    stats = {"corrections": 0, "outer_iterations": 0, "regrown_minima": 0}
    trace = []
    if augment:
        t0 = time.perf_counter()
        if gt is None or gt.eps_abs != eps_abs:
            gt = ground_truth(fld, eps_abs)
        timings["ct"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        bnd = initial_bounds(fld, gt.ct, xi_abs)
        timings["ulb"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        plan = quantize_field(g, fld.values, bnd.lower, bnd.upper,
                              bnd.lossless, xi_abs, mode)
        recon = reconstruct_field(g, plan, xi_abs, fld.values)
        tight = Tightener(fld, recon, bnd, plan, g, eps_abs, xi_abs,
                          gt.join, gt.split, callback=callback,
                          **(tighten_knobs or {}))
        stats = tight.run()
        trace = tight.trace
        timings["grow"] = time.perf_counter() - t0
        bounds_summary = width_stats(bnd)
    else:
        timings["ct"] = timings["ulb"] = timings["grow"] = 0.0
        plan = QuantizationPlan(np.zeros(fld.size, np.int64),
                                np.zeros(fld.size, np.int16),
                                np.zeros(fld.size, bool), mode)
        recon = g.copy()
        bounds_summary = {}

    t0 = time.perf_counter()
    codes = plan.flatten()
    lossless_idx = np.nonzero(plan.lossless)[0]
    header = {
        "dims": list(fld.dims),
        "precision": fld.source_precision,
        "eps": eps, "xi": xi,
        "eps_abs": eps_abs, "xi_abs": xi_abs,
        "range_min": fld.range_min, "range_max": fld.range_max,
        "connectivity": CONNECTIVITY_ID,
        "mode": mode,
        "p_m": plan.p_m,
        "base_id": comp.id,
        "base_params": comp.params(),
        "augmented": bool(augment),
        "outer": outer,
    }
    frame = basecomp.frame_payload(comp.id, comp.params(), payload)
    blob = arch.write_archive(header, frame, codes, lossless_idx,
                              fld.values[lossless_idx], outer=outer)
    timings["file"] = time.perf_counter() - t0
    timings["total"] = sum(timings.values())

    input_bytes = fld.size * (4 if fld.source_precision == "f32" else 8)
    ratio, bitrate = metrics.ratio_and_bitrate(input_bytes, len(blob),
                                               fld.source_precision)
    err = np.abs(fld.values - recon)
    report = {
        "params": {k: header[k] for k in
                   ("dims", "precision", "eps", "xi", "eps_abs", "xi_abs",
                    "mode", "base_id", "base_params", "connectivity",
                    "augmented", "outer")},
        "metrics": {
            "input_bytes": input_bytes,
            "archive_bytes": len(blob),
            "compression_ratio": ratio,
            "bit_rate": bitrate,
            "psnr_db": metrics.psnr(fld, recon),
            "max_abs_error": float(err.max()),
            "mean_abs_error": float(err.mean()),
            "lossless_count": int(plan.lossless.sum()),
        },
        "bounds": bounds_summary,
        "tightening": {k: v for k, v in stats.items() if k != "trace"},
        "timings": {k: round(v, 6) for k, v in timings.items()},
        "trace_rows": len(trace),
    }
    recon_field = ScalarField(fld.dims, recon, fld.source_precision)
    result = CompressResult(blob, recon_field, report)
    result.trace = trace
    return result


def decompress(blob: bytes) -> tuple[ScalarField, dict]:
    return arch.decompress_pipeline(blob)


def verify(fld: ScalarField, blob: bytes) -> dict:
    """Decompress and re-derive everything from scratch, then compare."""
    recon, header = arch.decompress_pipeline(blob)
    if tuple(header["dims"]) != fld.dims:
        raise ValueError(
            f"dims mismatch: field {fld.dims}, archive {tuple(header['dims'])}")
    eps_abs = float(header["eps_abs"])
    xi_abs = float(header["xi_abs"])
    gt_ref = ground_truth(fld, eps_abs, segmentation=False)
    gt_rec = ground_truth(recon, eps_abs, segmentation=False)
    ct_report = compare_trees(gt_ref.ct, gt_rec.ct)
    join_report = compare_trees(gt_ref.join, gt_rec.join)
    split_report = compare_trees(gt_ref.split, gt_rec.split)
    err = np.abs(fld.values - recon.values)
    return {
        "contour_false_cases": ct_report,
        "join_false_cases": join_report,
        "split_false_cases": split_report,
        "max_abs_error": float(err.max()),
        "xi_abs": xi_abs,
        "error_bound_ok": bool(err.max() <= xi_abs),
        "psnr_db": metrics.psnr(fld, recon.values),
        "header": header,
    }
