"""Minimal Netpbm reader/writer (PBM, PGM, PPM; ASCII and binary)."""
from __future__ import annotations

import os
import re

import numpy as np

from .errors import FormatError

_MAGICS = {b"P1", b"P2", b"P3", b"P4", b"P5", b"P6"}
_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _header(data: bytes, magic: bytes):
    n_fields = 2 if magic in (b"P1", b"P4") else 3
    pos = 2
    fields = []
    for _ in range(n_fields):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise FormatError("truncated Netpbm header", pos)
        try:
            fields.append(int(m.group(1)))
        except ValueError:
            raise FormatError(f"bad header field {m.group(1)!r}", m.start(1)) from None
        pos = m.end()
    if n_fields == 2:
        fields.append(1)
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError(f"empty raster {width}x{height}", 2)
    if not 1 <= maxval <= 65535:
        raise FormatError(f"maxval {maxval} out of range", 2)
    return width, height, maxval, pos


def _ascii_values(data: bytes, pos: int, count: int, bits: bool):
    body = re.sub(rb"#[^\n]*", b"", data[pos:])
    if bits:
        body = re.sub(rb"\s", b"", body)
        values = np.frombuffer(body, dtype=np.uint8) - ord("0")
    else:
        values = np.array(body.split(), dtype=np.int64)
    if values.size < count:
        raise FormatError(f"expected {count} samples, found {values.size}", len(data))
    return values[:count]


def decode(data: bytes) -> np.ndarray:
    """Decode Netpbm bytes to a uint8 array.

    PBM comes back as grayscale with ink (bit 1) mapped to 0 and paper to 255.
    PGM is ``(rows, cols)``; PPM is ``(rows, cols, 3)``. Samples with a maxval
    other than 255 are rescaled to 0..255.
    """
    magic = data[:2]
    if magic not in _MAGICS:
        raise FormatError(f"not a Netpbm file (magic {magic!r})", 0)
    width, height, maxval, pos = _header(data, magic)
    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels

    if magic == b"P4":
        pos += 1
        stride = (width + 7) // 8
        need = stride * height
        raw = np.frombuffer(data, dtype=np.uint8, count=min(need, len(data) - pos), offset=pos)
        if raw.size < need:
            raise FormatError(f"expected {need} bytes of bitmap, found {raw.size}", pos + raw.size)
        bits = np.unpackbits(raw.reshape(height, stride), axis=1)[:, :width]
        return np.where(bits == 1, 0, 255).astype(np.uint8)
    if magic == b"P1":
        bits = _ascii_values(data, pos, count, bits=True).reshape(height, width)
        return np.where(bits == 1, 0, 255).astype(np.uint8)

    if magic in (b"P2", b"P3"):
        values = _ascii_values(data, pos, count, bits=False)
        if values.min() < 0 or values.max() > maxval:
            raise FormatError(f"sample outside 0..{maxval}", pos)
    else:
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        need = count * dtype.itemsize
        available = len(data) - pos
        if available < need:
            raise FormatError(f"expected {need} bytes of samples, found {max(available, 0)}", len(data))
        values = np.frombuffer(data, dtype=dtype, count=count, offset=pos).astype(np.int64)

    if maxval != 255:
        values = (values * 255 + maxval // 2) // maxval
    shape = (height, width, 3) if channels == 3 else (height, width)
    return values.astype(np.uint8).reshape(shape)


def read(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode(fh.read())


def encode_pgm(gray: np.ndarray, ascii: bool = False) -> bytes:
    gray = np.asarray(gray)
    if gray.ndim != 2 or gray.size == 0:
        raise ValueError(f"expected a non-empty 2-D raster, got shape {gray.shape}")
    gray = gray.astype(np.uint8)
    rows, cols = gray.shape
    if ascii:
        body = "\n".join(" ".join(str(v) for v in row) for row in gray)
        return f"P2\n{cols} {rows}\n255\n{body}\n".encode("ascii")
    return f"P5\n{cols} {rows}\n255\n".encode("ascii") + gray.tobytes()


def encode_ppm(rgb: np.ndarray) -> bytes:
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (rows, cols, 3), got shape {rgb.shape}")
    rows, cols, _ = rgb.shape
    return f"P6\n{cols} {rows}\n255\n".encode("ascii") + rgb.tobytes()


def write_pgm(path: str | os.PathLike, gray: np.ndarray, ascii: bool = False) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(gray, ascii=ascii))
