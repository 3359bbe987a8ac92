"""Bit-exact archive container: entropy-coded codes, base payload, lossless values.

Layout (little endian throughout):

  outer:  magic "TPCA" | u16 version | u8 outer codec (0 store, 1 lzma)
          | u64 inner length | outer payload | sha256 of all preceding bytes
  inner:  magic "TPC1" | u32 header length | header JSON
          | u32 base frame length  | base payload frame
          | u32 table length       | canonical Huffman table
          | u64 symbol count | u64 bit count | bitstream bytes
          | u64 lossless count | records (u64 vertex, f32/f64 value)

The header JSON carries dims, precision, error parameters, connectivity id,
quantization mode, max precision, and the base compressor id/params, so an
archive decodes with no side information. The outer lossless stage is
pluggable and never affects decoded semantics.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import lzma
import struct
from collections import Counter

import numpy as np

from . import basecomp
from .errors import CorruptArchiveError, UnsupportedArchiveError
from .grid import ScalarField

OUTER_MAGIC = b"TPCA"
INNER_MAGIC = b"TPC1"
VERSION = 1
OUTER_STORE = 0
OUTER_LZMA = 1


# -- canonical Huffman ------------------------------------------------------

def _code_lengths(freqs: list[tuple[int, int]]) -> dict[int, int]:
    """Symbol -> code length from a deterministic Huffman tree build."""
    if len(freqs) == 1:
        return {freqs[0][0]: 1}
    heap = []
    for seq, (sym, f) in enumerate(freqs):
        heap.append((f, seq, sym, None, None))
    heapq.heapify(heap)
    seq = len(freqs)
    while len(heap) > 1:
        a = heapq.heappop(heap)
        b = heapq.heappop(heap)
        heapq.heappush(heap, (a[0] + b[0], seq, None, a, b))
        seq += 1
    lengths: dict[int, int] = {}
    stack = [(heap[0], 0)]
    while stack:
        node, depth = stack.pop()
        _f, _s, sym, left, right = node
        if sym is not None:
            lengths[sym] = depth
        else:
            stack.append((left, depth + 1))
            stack.append((right, depth + 1))
    return lengths


def _canonical_codes(lengths: dict[int, int]) -> list[tuple[int, int, int]]:
    """(symbol, length, code) sorted by (length, symbol), codes canonical."""
    ordered = sorted(lengths.items(), key=lambda kv: (kv[1], kv[0]))
    out = []
    code = 0
    prev_len = 0
    for sym, ln in ordered:
        code <<= (ln - prev_len)
        out.append((sym, ln, code))
        code += 1
        prev_len = ln
    return out


def huffman_encode(codes) -> tuple[bytes, bytes, int]:
    """Encode an integer stream; returns (table bytes, bitstream, bit count)."""
    syms = list(codes) if not isinstance(codes, np.ndarray) else codes.tolist()
    if not syms:
        raise ValueError("cannot encode an empty stream")
    freqs = sorted(Counter(syms).items())
    canon = _canonical_codes(_code_lengths(freqs))
    table = struct.pack("<I", len(canon))
    table += b"".join(struct.pack("<qB", sym, ln) for sym, ln, _ in canon)
    lut = {sym: (code, ln) for sym, ln, code in canon}
    acc = 0
    nbits = 0
    out = bytearray()
    for s in syms:
        code, ln = lut[s]
        acc = (acc << ln) | code
        nbits += ln
        while nbits >= 8:
            nbits -= 8
            out.append((acc >> nbits) & 0xFF)
        acc &= (1 << nbits) - 1
    total_bits = 8 * len(out) + nbits
    if nbits:
        out.append((acc << (8 - nbits)) & 0xFF)
    return table, bytes(out), total_bits


def huffman_decode(table: bytes, bitstream: bytes, nbits: int, count: int) -> np.ndarray:
    if len(table) < 4:
        raise CorruptArchiveError("truncated Huffman table")
    (n_sym,) = struct.unpack("<I", table[:4])
    if len(table) != 4 + 9 * n_sym:
        raise CorruptArchiveError("Huffman table size mismatch")
    entries = []
    for i in range(n_sym):
        sym, ln = struct.unpack("<qB", table[4 + 9 * i:13 + 9 * i])
        entries.append((sym, ln))
    canon = _canonical_codes({sym: ln for sym, ln in entries})
    by_len: dict[int, tuple[int, int, list[int]]] = {}
    for sym, ln, code in canon:
        if ln not in by_len:
            by_len[ln] = (code, code, [sym])
        else:
            first, _last, symlist = by_len[ln]
            symlist.append(sym)
            by_len[ln] = (first, code, symlist)
    out = np.empty(count, dtype=np.int64)
    acc = 0
    ln = 0
    pos = 0
    bit = 0
    for i in range(count):
        while True:
            if bit >= nbits:
                raise CorruptArchiveError("bitstream exhausted mid-symbol")
            byte = bitstream[bit >> 3]
            acc = (acc << 1) | ((byte >> (7 - (bit & 7))) & 1)
            bit += 1
            ln += 1
            ent = by_len.get(ln)
            if ent is not None:
                first, last, symlist = ent
                if first <= acc <= last:
                    out[i] = symlist[acc - first]
                    acc = 0
                    ln = 0
                    break
    return out


# -- container ---------------------------------------------------------------

def write_archive(header: dict, base_frame: bytes, codes,
                  lossless_idx: np.ndarray, lossless_vals: np.ndarray,
                  outer: str = "lzma") -> bytes:
    """Assemble and losslessly wrap the archive."""
    table, bits, nbits = huffman_encode(codes)
    n = len(codes)
    head = json.dumps(header, sort_keys=True).encode()
    prec = header["precision"]
    vdtype = "<f4" if prec == "f32" else "<f8"
    inner = bytearray()
    inner += INNER_MAGIC
    inner += struct.pack("<I", len(head)) + head
    inner += struct.pack("<I", len(base_frame)) + base_frame
    inner += struct.pack("<I", len(table)) + table
    inner += struct.pack("<QQ", n, nbits) + bits
    inner += struct.pack("<Q", lossless_idx.size)
    inner += lossless_idx.astype("<u8").tobytes()
    inner += lossless_vals.astype(vdtype).tobytes()
    inner = bytes(inner)
    codec = {"store": OUTER_STORE, "lzma": OUTER_LZMA}.get(outer)
    if codec is None:
        raise ValueError(f"unknown outer codec {outer!r}")
    payload = lzma.compress(inner, preset=6) if codec == OUTER_LZMA else inner
    blob = OUTER_MAGIC + struct.pack("<HBQ", VERSION, codec, len(inner)) + payload
    return blob + hashlib.sha256(blob).digest()


def read_archive(blob: bytes) -> dict:
    if len(blob) < 47 or blob[:4] != OUTER_MAGIC:
        raise CorruptArchiveError("not a recognizable archive")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptArchiveError("archive checksum mismatch")
    version, codec, inner_len = struct.unpack("<HBQ", body[4:15])
    if version != VERSION:
        raise UnsupportedArchiveError(f"archive version {version} unsupported")
    payload = body[15:]
    if codec == OUTER_LZMA:
        inner = lzma.decompress(payload)
    elif codec == OUTER_STORE:
        inner = payload
    else:
        raise UnsupportedArchiveError(f"unknown outer codec id {codec}")
    if len(inner) != inner_len:
        raise CorruptArchiveError("inner container length mismatch")
    if inner[:4] != INNER_MAGIC:
        raise CorruptArchiveError("inner container magic mismatch")
    pos = 4
    (hlen,) = struct.unpack("<I", inner[pos:pos + 4]); pos += 4
    header = json.loads(inner[pos:pos + hlen].decode()); pos += hlen
    (blen,) = struct.unpack("<I", inner[pos:pos + 4]); pos += 4
    base_frame = inner[pos:pos + blen]; pos += blen
    (tlen,) = struct.unpack("<I", inner[pos:pos + 4]); pos += 4
    table = inner[pos:pos + tlen]; pos += tlen
    n, nbits = struct.unpack("<QQ", inner[pos:pos + 16]); pos += 16
    nbytes = (nbits + 7) // 8
    bits = inner[pos:pos + nbytes]; pos += nbytes
    (lcount,) = struct.unpack("<Q", inner[pos:pos + 8]); pos += 8
    lidx = np.frombuffer(inner[pos:pos + 8 * lcount], dtype="<u8"); pos += 8 * lcount
    vdtype = "<f4" if header["precision"] == "f32" else "<f8"
    vsize = 4 if header["precision"] == "f32" else 8
    lvals = np.frombuffer(inner[pos:pos + vsize * lcount], dtype=vdtype)
    pos += vsize * lcount
    if pos != len(inner) or len(bits) != nbytes or lvals.size != lcount:
        raise CorruptArchiveError("inner container truncated")
    codes = huffman_decode(table, bits, nbits, n)
    return {
        "header": header,
        "base_frame": base_frame,
        "codes": codes,
        "lossless_idx": lidx.astype(np.int64),
        "lossless_vals": lvals.astype(np.float64),
    }


def decompress_pipeline(blob: bytes) -> tuple[ScalarField, dict]:
    """Run the full decoder: base decompressor, code augmentation, exact values."""
    from .quantize import LOSSLESS_CODE

    parts = read_archive(blob)
    header = parts["header"]
    dims = tuple(header["dims"])
    base_id, params, payload = basecomp.unframe_payload(parts["base_frame"])
    if base_id != header["base_id"]:
        raise CorruptArchiveError("base compressor id disagrees with header")
    comp = basecomp.make_compressor(base_id, params)
    g = comp.decompress(payload, dims)
    codes = parts["codes"]
    xi_abs = float(header["xi_abs"])
    p_m = int(header["p_m"])
    quantized = codes != LOSSLESS_CODE
    values = g.values.copy()
    values[quantized] = g.values[quantized] + \
        (2.0 * xi_abs * codes[quantized]) / float(1 << p_m)
    values[parts["lossless_idx"]] = parts["lossless_vals"]
    if int(quantized.sum()) + parts["lossless_idx"].size != values.size:
        raise CorruptArchiveError("quantized/lossless counts inconsistent")
    fld = ScalarField(dims, values, header["precision"])
    return fld, header
