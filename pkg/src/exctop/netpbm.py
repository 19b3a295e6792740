"""Bit-exact netpbm I/O: PBM (P1/P4) for excursion masks, 16-bit PGM (P5)
plus a JSON sidecar for fields.

Files store the top row first; in memory row 0 is the bottom row, so every
reader/writer flips vertically. PBM writers embed the lattice metadata in a
header comment (``# exctop eps=... boundary_mode=... origin=x,y``) that the
reader picks up again, which makes ``write -> read`` lossless.
"""
from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .errors import NetpbmParseError
from .excursion import BinaryImage
from .synthesis import CovarianceModel, FieldSample

_WS = b" \t\n\r\v\f"
_META = re.compile(rb"exctop\s+(.*)")


class _Header:
    """Cursor over a netpbm header: whitespace, comments, ASCII integers."""

    def __init__(self, data: bytes, pos: int = 2):
        self.data = data
        self.pos = pos
        self.comments: list[bytes] = []

    def skip(self):
        data = self.data
        while self.pos < len(data):
            c = data[self.pos:self.pos + 1]
            if c in _WS:
                self.pos += 1
            elif c == b"#":
                end = data.find(b"\n", self.pos)
                end = len(data) if end < 0 else end
                self.comments.append(data[self.pos + 1:end].strip())
                self.pos = end
            else:
                break

    def integer(self, what: str) -> int:
        self.skip()
        start = self.pos
        while self.pos < len(self.data) and self.data[self.pos:self.pos + 1].isdigit():
            self.pos += 1
        if self.pos == start:
            raise NetpbmParseError(f"expected {what}", start)
        value = int(self.data[start:self.pos])
        if value <= 0:
            raise NetpbmParseError(f"{what} must be positive", start)
        return value

    def single_whitespace(self):
        if self.pos >= len(self.data) or self.data[self.pos:self.pos + 1] not in _WS:
            raise NetpbmParseError("expected a whitespace byte before the raster", self.pos)
        self.pos += 1


def _parse_meta(comments) -> dict:
    meta = {}
    for c in comments:
        m = _META.match(c)
        if not m:
            continue
        for item in m.group(1).decode("ascii", "replace").split():
            key, _, val = item.partition("=")
            meta[key] = val
    out = {}
    if "eps" in meta:
        out["eps"] = float(meta["eps"])
    if "boundary_mode" in meta:
        out["boundary_mode"] = meta["boundary_mode"]
    if "origin" in meta:
        x, y = meta["origin"].split(",")
        out["origin"] = (float(x), float(y))
    return out


def parse_pbm(data: bytes) -> tuple[np.ndarray, dict]:
    """Decode PBM bytes to (picture rows top-first as bool array, metadata)."""
    if len(data) < 2 or data[:1] != b"P" or data[1:2] not in (b"1", b"4"):
        raise NetpbmParseError("not a PBM file (magic must be P1 or P4)", 0)
    binary = data[1:2] == b"4"
    hdr = _Header(data)
    width = hdr.integer("width")
    height = hdr.integer("height")
    if binary:
        hdr.single_whitespace()
        row_bytes = (width + 7) // 8
        need = row_bytes * height
        raster = data[hdr.pos:hdr.pos + need]
        if len(raster) < need:
            raise NetpbmParseError(f"truncated P4 raster: need {need} bytes, found {len(raster)}",
                                   hdr.pos + len(raster))
        packed = np.frombuffer(raster, dtype=np.uint8).reshape(height, row_bytes)
        bits = np.unpackbits(packed, axis=1)[:, :width].astype(bool)
        return bits, _parse_meta(hdr.comments)
    out = np.empty(width * height, dtype=bool)
    n = 0
    pos = hdr.pos
    while n < out.size:
        hdr.pos = pos
        hdr.skip()
        pos = hdr.pos
        if pos >= len(data):
            raise NetpbmParseError(f"truncated P1 raster: {n} of {out.size} pixels read", pos)
        c = data[pos:pos + 1]
        if c not in (b"0", b"1"):
            raise NetpbmParseError(f"unexpected byte {c!r} in P1 raster", pos)
        out[n] = c == b"1"
        n += 1
        pos += 1
    return out.reshape(height, width), _parse_meta(hdr.comments)


def _meta_comment(img: BinaryImage) -> bytes:
    x, y = img.origin
    return (f"# exctop eps={img.eps!r} boundary_mode={img.boundary_mode} "
            f"origin={x!r},{y!r}\n").encode("ascii")


def encode_pbm(img: BinaryImage, fmt: str = "P4", metadata: bool = True) -> bytes:
    rows = np.ascontiguousarray(img.bits[::-1])
    height, width = rows.shape
    head = fmt.encode("ascii") + b"\n" + (_meta_comment(img) if metadata else b"")
    head += f"{width} {height}\n".encode("ascii")
    if fmt == "P4":
        return head + np.packbits(rows, axis=1).tobytes()
    if fmt == "P1":
        lines = []
        for row in rows:
            s = "".join("1" if b else "0" for b in row)
            lines.extend(s[i:i + 70] for i in range(0, len(s), 70))
        return head + ("\n".join(lines) + "\n").encode("ascii")
    raise ValueError("fmt must be 'P1' or 'P4'")


def write_pbm(path, img: BinaryImage, fmt: str = "P4", metadata: bool = True) -> None:
    Path(path).write_bytes(encode_pbm(img, fmt, metadata))


def read_pbm(path, eps=None, boundary_mode=None, origin=None) -> BinaryImage:
    """Load a PBM; explicit arguments override the embedded metadata."""
    bits, meta = parse_pbm(Path(path).read_bytes())
    return BinaryImage(bits[::-1],
                       eps=eps if eps is not None else meta.get("eps", 1.0),
                       boundary_mode=boundary_mode or meta.get("boundary_mode", "bounded"),
                       origin=origin if origin is not None else meta.get("origin", (0.0, 0.0)))


def quantize16(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Affine map to uint16: ``value ~= offset + scale * q``."""
    lo, hi = float(values.min()), float(values.max())
    scale = (hi - lo) / 65535.0 if hi > lo else 1.0
    q = np.rint((values - lo) / scale).clip(0, 65535).astype(np.uint16)
    return q, scale, lo


def sidecar(fld: FieldSample, scale: float, offset: float) -> dict:
    return {
        "format": "P5-16bit",
        "scale": scale,
        "offset": offset,
        "eps": fld.eps,
        "dims": list(fld.dims),
        "origin": list(fld.origin),
        "boundary_mode": fld.boundary_mode,
        "seed": fld.seed,
        "stream": fld.stream,
        "model": fld.model.to_dict() if fld.model else None,
        "row_order": "top-first",
    }


def write_pgm16(path, fld: FieldSample) -> dict:
    """Write ``path`` (P5, maxval 65535, big-endian) and ``path.json``; return the sidecar."""
    q, scale, offset = quantize16(fld.values)
    rows = q[::-1]
    height, width = rows.shape
    head = f"P5\n{width} {height}\n65535\n".encode("ascii")
    Path(path).write_bytes(head + rows.astype(">u2").tobytes())
    meta = sidecar(fld, scale, offset)
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta


def parse_pgm16(data: bytes) -> np.ndarray:
    """Decode 16-bit P5 bytes to uint16 picture rows (top-first)."""
    if data[:2] != b"P5":
        raise NetpbmParseError("not a binary PGM file (magic must be P5)", 0)
    hdr = _Header(data)
    width = hdr.integer("width")
    height = hdr.integer("height")
    maxval = hdr.integer("maxval")
    if maxval < 256 or maxval > 65535:
        raise NetpbmParseError(f"only 16-bit PGM is supported, maxval={maxval}", hdr.pos)
    hdr.single_whitespace()
    need = 2 * width * height
    raster = data[hdr.pos:hdr.pos + need]
    if len(raster) < need:
        raise NetpbmParseError(f"truncated P5 raster: need {need} bytes, found {len(raster)}",
                               hdr.pos + len(raster))
    return np.frombuffer(raster, dtype=">u2").reshape(height, width).astype(np.uint16)


def read_pgm16(path) -> FieldSample:
    """Reconstruct the (quantized) field from a PGM and its JSON sidecar."""
    q = parse_pgm16(Path(path).read_bytes())
    meta = json.loads(Path(str(path) + ".json").read_text())
    values = meta["offset"] + meta["scale"] * q[::-1].astype(float)
    model = CovarianceModel(**meta["model"]) if meta.get("model") else None
    return FieldSample(values, meta["eps"], meta["boundary_mode"], meta.get("seed"), meta.get("stream"),
                       model, tuple(meta["origin"]))


def write_field_csv(path, fld: FieldSample) -> None:
    """Raw values, top row first, full double precision."""
    np.savetxt(path, fld.values[::-1], fmt="%.17g", delimiter=",")


def read_field_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)[::-1]
