"""Report rendering: delimited outputs plus matplotlib figures on disk."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .grid import ScalarField
from .metrics import flat_report


def write_compress_report(outdir, report: dict, fld: ScalarField = None,
                          recon: ScalarField = None, trace=None) -> list[str]:
    """Write report.txt / report.json (+ timing CSV, trace CSV, figures).

    Returns the list of files written, relative to outdir.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    (outdir / "report.txt").write_text(flat_report(report))
    written.append("report.txt")
    (outdir / "report.json").write_text(json.dumps(report, indent=2,
                                                   sort_keys=True, default=str))
    written.append("report.json")

    with open(outdir / "timings.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "seconds"])
        for stage in ("bc", "ct", "ulb", "grow", "file", "total"):
            w.writerow([stage, report["timings"].get(stage, 0.0)])
    written.append("timings.csv")

    if trace:
        with open(outdir / "corrections.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "outer", "side", "kind", "extremum",
                        "saddle", "iteration", "region_size", "intervals",
                        "new_lossless"])
            for r in trace:
                w.writerow([r.index, r.outer, r.side, r.kind, r.extremum,
                            r.saddle, r.iteration, r.region_size,
                            r.intervals, r.new_lossless])
        written.append("corrections.csv")

    if fld is not None and recon is not None:
        written += _error_figures(outdir, fld, recon)
    return written


def _error_figures(outdir: Path, fld: ScalarField, recon: ScalarField) -> list[str]:
    err = np.abs(fld.values - recon.values)
    nx, ny, nz = fld.dims
    vol = err.reshape((nx, ny, nz), order="F")

    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    axes[0].hist(err, bins=64, color="#4878b0", log=True)
    axes[0].set_xlabel("absolute error")
    axes[0].set_ylabel("vertex count")
    axes[0].set_title("error distribution")
    im = axes[1].imshow(vol[:, :, nz // 2].T, origin="lower", cmap="magma")
    axes[1].set_title(f"|error|, z = {nz // 2}")
    fig.colorbar(im, ax=axes[1], shrink=0.85)
    fig.tight_layout()
    fig.savefig(outdir / "error_map.png", dpi=130)
    plt.close(fig)
    return ["error_map.png"]


def write_sweep_outputs(outdir, rows: list[dict], vary_key: str) -> list[str]:
    """CSV of sweep results plus rate/quality curve figures."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    if not rows:
        return written
    cols = list(rows[0].keys())
    with open(outdir / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        w.writerows(rows)
    written.append("sweep.csv")

    x = [r[vary_key] for r in rows]
    fig, axes = plt.subplots(1, 3, figsize=(12.5, 3.4))
    axes[0].plot(x, [r["compression_ratio"] for r in rows], "o-")
    axes[0].set_xlabel(vary_key)
    axes[0].set_ylabel("compression ratio")
    axes[1].plot(x, [r["psnr_db"] for r in rows], "s-", color="#b04848")
    axes[1].set_xlabel(vary_key)
    axes[1].set_ylabel("PSNR (dB)")
    axes[2].plot([r["bit_rate"] for r in rows], [r["psnr_db"] for r in rows], "d-",
                 color="#48a068")
    axes[2].set_xlabel("bit-rate (bits/value)")
    axes[2].set_ylabel("PSNR (dB)")
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(outdir / "sweep_curves.png", dpi=130)
    plt.close(fig)
    written.append("sweep_curves.png")
    return written
