"""Binary PPM (P6) image I/O, 8-bit RGB, maxval 255.

Header tokens may be separated by any whitespace and '#' comments; exactly
one whitespace byte separates the maxval from the pixel payload. The writer
emits the canonical "P6\\n{w} {h}\\n255\\n" header.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeError


def _read_header_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    if pos >= n:
        raise FormatError("ppm: truncated header")
    start = pos
    while pos < n and not data[pos:pos + 1].isspace():
        pos += 1
    return data[start:pos], pos


def decode_ppm(data: bytes) -> np.ndarray:
    """Bytes -> (height, width, 3) uint8 array."""
    magic, pos = _read_header_token(data, 0)
    if magic != b"P6":
        raise FormatError(f"ppm: bad magic {magic!r}, expected P6")
    fields = []
    for name in ("width", "height", "maxval"):
        token, pos = _read_header_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError as e:
            raise FormatError(f"ppm: non-numeric {name} {token!r}") from e
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise FormatError(f"ppm: bad dimensions {width}x{height}")
    if maxval != 255:
        raise FormatError(f"ppm: maxval must be 255, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    expected = width * height * 3
    payload = data[pos:pos + expected]
    if len(payload) != expected:
        raise FormatError(f"ppm: payload has {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy()


def encode_ppm(image: np.ndarray) -> np.ndarray | bytes:
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError(f"ppm: image must be (h, w, 3), got {img.shape}")
    if img.dtype != np.uint8:
        raise ShapeError(f"ppm: image must be uint8, got {img.dtype}")
    h, w, _ = img.shape
    return b"P6\n%d %d\n255\n" % (w, h) + img.tobytes(order="C")


def read_ppm(path: str | Path) -> np.ndarray:
    return decode_ppm(Path(path).read_bytes())


def write_ppm(path: str | Path, image: np.ndarray) -> None:
    Path(path).write_bytes(encode_ppm(image))
