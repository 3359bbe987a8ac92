"""Command line front end.

Subcommands: compress, decompress, verify, stats, synth, sweep. RAW volumes
are headerless little-endian float32/float64 streams in x-fastest order;
dimensions come from the command line (or from the archive header where one
is available).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import grid, metrics, pipeline, synth
from .config import RunConfig, parse_config
from .mergetree import build_merge_tree
from .report import write_compress_report, write_sweep_outputs


def _dims(text: str) -> tuple[int, int, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 3 or any(p < 1 for p in parts):
        raise argparse.ArgumentTypeError("dims must be three positive integers")
    return tuple(parts)


def _add_field_args(p):
    p.add_argument("--dims", type=_dims, required=True, help="nx,ny,nz")
    p.add_argument("--precision", choices=("f32", "f64"), default="f32")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="topocomp",
        description="Topology-preserving lossy compression of 3D scalar fields")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compress", help="compress a RAW volume")
    c.add_argument("--input", required=True)
    _add_field_args(c)
    c.add_argument("--eps", type=float, default=pipeline.DEFAULT_EPS,
                   help="persistence threshold, fraction of range")
    c.add_argument("--xi", type=float, default=pipeline.DEFAULT_XI,
                   help="pointwise error bound, fraction of range")
    c.add_argument("--base", default="csi", help="base compressor id (csi|lorenzo)")
    c.add_argument("--scale", type=int, default=pipeline.DEFAULT_CSI_SCALE,
                   help="CSI target scale factor")
    c.add_argument("--mode", choices=("log", "linear"), default="log")
    c.add_argument("--skip-augmentation", action="store_true",
                   help="debug: store the raw base compressor output")
    c.add_argument("--out", required=True)
    c.add_argument("--report-dir", default="")
    c.add_argument("--growth-delay", type=int, default=3)
    c.add_argument("--fp-to-fn-switch", type=int, default=6)
    c.add_argument("--correction-ceiling", type=int, default=10 ** 6)

    d = sub.add_parser("decompress", help="decompress an archive to RAW")
    d.add_argument("--archive", required=True)
    d.add_argument("--out", required=True)

    v = sub.add_parser("verify", help="compare an archive against its original")
    v.add_argument("--original", required=True)
    v.add_argument("--archive", required=True)
    v.add_argument("--report-dir", default="")

    s = sub.add_parser("synth", help="generate a synthetic RAW volume")
    s.add_argument("--kind", choices=synth.KINDS, default="gaussians")
    _add_field_args(s)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=2)
    s.add_argument("--out", required=True)

    t = sub.add_parser("stats", help="metrics between two RAW volumes")
    t.add_argument("--original", required=True)
    t.add_argument("--reconstructed", required=True)
    _add_field_args(t)
    t.add_argument("--report-dir", default="")

    w = sub.add_parser("sweep", help="run a parameter sweep from a config file")
    w.add_argument("--config", required=True)
    w.add_argument("--out-dir", required=True)
    return ap


def _load_field(path, dims, precision) -> grid.ScalarField:
    if not Path(path).is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    return grid.read_raw(path, dims, precision)


def cmd_compress(args) -> int:
    fld = _load_field(args.input, args.dims, args.precision)
    base_params = {"s": args.scale} if args.base == "csi" else None
    res = pipeline.compress(
        fld, eps=args.eps, xi=args.xi, base_id=args.base,
        base_params=base_params, mode=args.mode,
        augment=not args.skip_augmentation,
        tighten_knobs={
            "growth_delay": args.growth_delay,
            "fp_to_fn_switch": args.fp_to_fn_switch,
            "correction_ceiling": args.correction_ceiling,
        })
    Path(args.out).write_bytes(res.blob)
    print(metrics.flat_report(res.report), end="")
    if args.report_dir:
        files = write_compress_report(args.report_dir, res.report, fld,
                                      res.recon, res.trace)
        print(f"report written to {args.report_dir}: {', '.join(files)}")
    return 0


def cmd_decompress(args) -> int:
    fld, header = pipeline.decompress(Path(args.archive).read_bytes())
    grid.write_raw(fld, args.out)
    print(f"wrote {args.out}: dims={tuple(header['dims'])} "
          f"precision={header['precision']}")
    return 0


def cmd_verify(args) -> int:
    blob = Path(args.archive).read_bytes()
    from .archive import read_archive
    header = read_archive(blob)["header"]
    fld = _load_field(args.original, tuple(header["dims"]), header["precision"])
    out = pipeline.verify(fld, blob)
    ct = out["contour_false_cases"]
    report = {
        "contour_false_cases": {
            "false_positives": len(ct.false_positives),
            "false_negatives": len(ct.false_negatives),
            "false_types": len(ct.false_types),
        },
        "join_false_cases": str(out["join_false_cases"]),
        "split_false_cases": str(out["split_false_cases"]),
        "max_abs_error": out["max_abs_error"],
        "xi_abs": out["xi_abs"],
        "error_bound_ok": out["error_bound_ok"],
        "psnr_db": out["psnr_db"],
    }
    print(metrics.flat_report(report), end="")
    if args.report_dir:
        Path(args.report_dir).mkdir(parents=True, exist_ok=True)
        (Path(args.report_dir) / "verify.json").write_text(
            json.dumps(report, indent=2, sort_keys=True))
    return 0 if (ct.is_clean and out["error_bound_ok"]) else 1


def cmd_synth(args) -> int:
    fld = synth.make_field(args.kind, args.dims, seed=args.seed,
                           count=args.count, precision=args.precision)
    grid.write_raw(fld, args.out)
    print(f"wrote {args.out}: kind={args.kind} dims={args.dims} seed={args.seed}")
    return 0


def cmd_stats(args) -> int:
    fld = _load_field(args.original, args.dims, args.precision)
    rec = _load_field(args.reconstructed, args.dims, args.precision)
    err = np.abs(fld.values - rec.values)
    report = {
        "psnr_db": metrics.psnr(fld, rec.values),
        "max_abs_error": float(err.max()),
        "mean_abs_error": float(err.mean()),
    }
    try:
        d_ref = metrics.diagram_from_tree(
            (build_merge_tree(fld, "join"), build_merge_tree(fld, "split")))
        d_rec = metrics.diagram_from_tree(
            (build_merge_tree(rec, "join"), build_merge_tree(rec, "split")))
        floor = metrics.DIAGRAM_NOISE_FLOOR * fld.value_range
        d_ref = d_ref.simplified(floor)
        d_rec = d_rec.simplified(floor)
        report["wasserstein_w2"] = metrics.wasserstein(d_ref, d_rec, 2.0)
        report["bottleneck_winf"] = metrics.bottleneck(d_ref, d_rec)
    except Exception as exc:  # diagram too large for the exact solver
        report["distance_note"] = f"skipped: {exc}"
    print(metrics.flat_report(report), end="")
    if args.report_dir:
        write_compress_report(args.report_dir,
                              {"params": {}, "metrics": report,
                               "timings": {}, "bounds": {}, "tightening": {}},
                              fld, rec)
    return 0


def cmd_sweep(args) -> int:
    cfg = parse_config(Path(args.config).read_text())
    if cfg.vary not in ("xi", "eps", "scale"):
        raise ValueError("sweep config needs vary=xi|eps|scale and values=...")
    if not cfg.values:
        raise ValueError("sweep config needs values=v1,v2,...")
    if cfg.input:
        fld = _load_field(cfg.input, cfg.dims, cfg.precision)
    else:
        fld = synth.make_field(cfg.kind, cfg.dims, seed=cfg.seed,
                               count=cfg.count, precision=cfg.precision)
    rows = []
    for val in cfg.values:
        eps, xi, scale = cfg.eps, cfg.xi, cfg.scale
        if cfg.vary == "xi":
            xi = float(val)
        elif cfg.vary == "eps":
            eps = float(val)
        else:
            scale = int(val)
        res = pipeline.compress(
            fld, eps=eps, xi=xi, base_id=cfg.base,
            base_params={"s": scale} if cfg.base == "csi" else None,
            mode=cfg.mode,
            tighten_knobs={"growth_delay": cfg.growth_delay,
                           "fp_to_fn_switch": cfg.fp_to_fn_switch,
                           "correction_ceiling": cfg.correction_ceiling})
        m = res.report["metrics"]
        rows.append({
            cfg.vary: val, "eps": eps, "xi": xi, "scale": scale,
            "compression_ratio": m["compression_ratio"],
            "bit_rate": m["bit_rate"],
            "psnr_db": m["psnr_db"],
            "max_abs_error": m["max_abs_error"],
            "lossless_count": m["lossless_count"],
            "corrections": res.report["tightening"]["corrections"],
            "archive_bytes": m["archive_bytes"],
        })
        print(f"{cfg.vary}={val}: ratio={m['compression_ratio']:.2f} "
              f"psnr={m['psnr_db']:.2f}")
    files = write_sweep_outputs(args.out_dir, rows, cfg.vary)
    print(f"sweep outputs in {args.out_dir}: {', '.join(files)}")
    return 0


_COMMANDS = {
    "compress": cmd_compress,
    "decompress": cmd_decompress,
    "verify": cmd_verify,
    "synth": cmd_synth,
    "stats": cmd_stats,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
