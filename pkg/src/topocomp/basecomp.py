"""Pluggable base compressors and their byte-payload framing.

A base compressor provides ``compress(field) -> bytes`` and
``decompress(payload, dims) -> ScalarField``; the decompressed output is the
intermediate data the augmentation layer corrects. Implementations must be
deterministic for fixed inputs and parameters.

Two are built in: a cubic-spline-interpolation downsampler (samples every
s-th vertex per axis, first and last index always kept, separable natural
spline reconstruction) and a first-order Lorenzo predictor with linear
residual quantization, which is itself error bounded.
"""

from __future__ import annotations

import json
import struct

import numpy as np
from scipy.interpolate import CubicSpline

from . import _lorenzo
from .errors import CorruptArchiveError, UnsupportedArchiveError
from .grid import ScalarField


class BaseCompressor:
    """Contract every base compressor implements."""

    id: str = ""

    def params(self) -> dict:
        raise NotImplementedError

    def compress(self, fld: ScalarField) -> bytes:
        raise NotImplementedError

    def decompress(self, payload: bytes, dims: tuple[int, int, int]) -> ScalarField:
        raise NotImplementedError


def _sample_indices(n: int, s: int) -> np.ndarray:
    idx = list(range(0, n, s))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    return np.asarray(idx, dtype=np.int64)


class CsiCompressor(BaseCompressor):
    """Downsample by a target scale factor per axis, reconstruct with a
    separable natural cubic spline. Exact at the retained sample vertices."""

    id = "csi"

    def __init__(self, s: int = 7):
        if int(s) < 1:
            raise ValueError("scale factor must be >= 1")
        self.s = int(s)

    def params(self) -> dict:
        return {"s": self.s}

    def compress(self, fld: ScalarField) -> bytes:
        nx, ny, nz = fld.dims
        ix = _sample_indices(nx, self.s)
        iy = _sample_indices(ny, self.s)
        iz = _sample_indices(nz, self.s)
        vol = fld.values.reshape((nx, ny, nz), order="F")
        samples = vol[np.ix_(ix, iy, iz)]
        head = struct.pack("<4sIIII", b"CSIv", self.s, ix.size, iy.size, iz.size)
        return head + samples.astype("<f8").tobytes(order="F")

    def decompress(self, payload: bytes, dims: tuple[int, int, int]) -> ScalarField:
        if len(payload) < 20 or payload[:4] != b"CSIv":
            raise CorruptArchiveError("bad CSI payload header")
        s, kx, ky, kz = struct.unpack("<IIII", payload[4:20])
        need = 20 + kx * ky * kz * 8
        if len(payload) != need:
            raise CorruptArchiveError("CSI payload size mismatch")
        nx, ny, nz = dims
        samples = np.frombuffer(payload[20:], dtype="<f8").reshape(
            (kx, ky, kz), order="F").astype(np.float64)
        ix = _sample_indices(nx, s)
        iy = _sample_indices(ny, s)
        iz = _sample_indices(nz, s)
        if (ix.size, iy.size, iz.size) != (kx, ky, kz):
            raise CorruptArchiveError("CSI payload disagrees with dims")
        vol = _spline_axis(samples, ix, nx, axis=0)
        vol = _spline_axis(vol, iy, ny, axis=1)
        vol = _spline_axis(vol, iz, nz, axis=2)
        # keep the stored samples bit-exact in the reconstruction
        vol[np.ix_(ix, iy, iz)] = samples
        return ScalarField(dims, vol.ravel(order="F"))


def _spline_axis(data: np.ndarray, knots: np.ndarray, n_out: int, axis: int) -> np.ndarray:
    xq = np.arange(n_out, dtype=np.float64)
    if knots.size == 1:
        reps = [1, 1, 1]
        reps[axis] = n_out
        return np.tile(data, reps)
    if knots.size == 2:
        t = (xq - knots[0]) / (knots[1] - knots[0])
        shape = [1, 1, 1]
        shape[axis] = n_out
        t = t.reshape(shape)
        lo = np.take(data, [0], axis=axis)
        hi = np.take(data, [1], axis=axis)
        return lo * (1 - t) + hi * t
    spl = CubicSpline(knots.astype(np.float64), data, axis=axis, bc_type="natural")
    return spl(xq)


class LorenzoCompressor(BaseCompressor):
    """First-order 3D Lorenzo prediction over already-reconstructed values,
    residuals snapped to the 2*xi quantization grid. The intermediate data it
    produces is itself within xi of the input everywhere."""

    id = "lorenzo"

    def __init__(self, xi_abs: float = 1e-3):
        if xi_abs <= 0:
            raise ValueError("error bound must be positive")
        self.xi_abs = float(xi_abs)

    def params(self) -> dict:
        return {"xi_abs": self.xi_abs}

    def compress(self, fld: ScalarField) -> bytes:
        codes, overrides = _lorenzo_encode(fld.values, fld.dims, self.xi_abs)
        head = struct.pack("<4sdI", b"LRZv", self.xi_abs, len(overrides))
        body = codes.astype("<i4").tobytes()
        over = b"".join(struct.pack("<qd", i, v) for i, v in overrides)
        return head + over + body

    def decompress(self, payload: bytes, dims: tuple[int, int, int]) -> ScalarField:
        if len(payload) < 16 or payload[:4] != b"LRZv":
            raise CorruptArchiveError("bad Lorenzo payload header")
        xi, n_over = struct.unpack("<dI", payload[4:16])
        pos = 16
        overrides = {}
        for _ in range(n_over):
            i, v = struct.unpack("<qd", payload[pos:pos + 16])
            overrides[i] = v
            pos += 16
        n = dims[0] * dims[1] * dims[2]
        if len(payload) != pos + 4 * n:
            raise CorruptArchiveError("Lorenzo payload size mismatch")
        codes = np.frombuffer(payload[pos:], dtype="<i4").astype(np.int64)
        vals = _lorenzo_decode(codes, overrides, dims, xi)
        return ScalarField(dims, vals)


def _lorenzo_encode(vals: np.ndarray, dims, xi: float):
    nx, ny, nz = dims
    codes, override, _rec = _lorenzo.encode_core(vals, nx, ny, nz, xi)
    overrides = [(int(v), float(vals[v])) for v in np.nonzero(override)[0]]
    return codes, overrides


def _lorenzo_decode(codes: np.ndarray, overrides: dict, dims, xi: float) -> np.ndarray:
    nx, ny, nz = dims
    override = np.zeros(codes.size, dtype=np.uint8)
    exact = np.zeros(codes.size, dtype=np.float64)
    for i, v in overrides.items():
        override[i] = 1
        exact[i] = v
    return _lorenzo.decode_core(codes, override, exact, nx, ny, nz, xi)


def lorenzo_intermediate(fld: ScalarField, xi_abs: float) -> ScalarField:
    """Intermediate data from the Lorenzo round trip (always within xi_abs)."""
    comp = LorenzoCompressor(xi_abs)
    return comp.decompress(comp.compress(fld), fld.dims)


def make_compressor(base_id: str, params: dict) -> BaseCompressor:
    if base_id == "csi":
        return CsiCompressor(int(params.get("s", 7)))
    if base_id == "lorenzo":
        return LorenzoCompressor(float(params["xi_abs"]))
    if base_id in _EXTERNAL:
        return _EXTERNAL[base_id](params)
    raise UnsupportedArchiveError(f"unknown base compressor {base_id!r}")


_EXTERNAL: dict = {}


def register_compressor(base_id: str, factory) -> None:
    """Hook for wiring additional compressors through the byte contract."""
    _EXTERNAL[base_id] = factory


def frame_payload(base_id: str, params: dict, payload: bytes) -> bytes:
    """[id][params json][payload] container embedded in archives."""
    bid = base_id.encode()
    pjs = json.dumps(params, sort_keys=True).encode()
    return struct.pack("<HH", len(bid), len(pjs)) + bid + pjs + payload


def unframe_payload(blob: bytes) -> tuple[str, dict, bytes]:
    if len(blob) < 4:
        raise CorruptArchiveError("truncated base payload frame")
    lid, lpr = struct.unpack("<HH", blob[:4])
    if len(blob) < 4 + lid + lpr:
        raise CorruptArchiveError("truncated base payload frame")
    bid = blob[4:4 + lid].decode()
    params = json.loads(blob[4 + lid:4 + lid + lpr].decode())
    return bid, params, blob[4 + lid + lpr:]
