"""Flat binary container for named float64 arrays.

Layout (all integers little-endian u32, payload little-endian f64, C order):

    magic "SGMM" | version | record*
    record = name_len | name (UTF-8) | rank | dims[rank] | values

Records are written sorted by name so the bytes are a pure function of the
array contents. Round-trips are exact: f64 payloads are never converted.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"SGMM"
VERSION = 1


def dump_arrays(arrays: dict[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    for name in sorted(arrays):
        # note: ascontiguousarray would promote rank-0 arrays to rank 1
        arr = np.asarray(arrays[name], dtype=np.float64, order="C")
        name_b = name.encode("utf-8")
        buf.write(struct.pack("<I", len(name_b)))
        buf.write(name_b)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(arr.astype("<f8", copy=False).tobytes(order="C"))
    return buf.getvalue()


def load_arrays(data: bytes) -> dict[str, np.ndarray]:
    view = memoryview(data)
    if len(view) < 8 or bytes(view[:4]) != MAGIC:
        raise FormatError("checkpoint: bad magic, expected 'SGMM'")
    (version,) = struct.unpack_from("<I", view, 4)
    if version != VERSION:
        raise FormatError(f"checkpoint: unsupported version {version}")
    pos = 8
    out: dict[str, np.ndarray] = {}

    def need(n: int, what: str) -> None:
        if pos + n > len(view):
            raise FormatError(f"checkpoint: truncated while reading {what} at byte {pos}")

    while pos < len(view):
        need(4, "name length")
        (name_len,) = struct.unpack_from("<I", view, pos)
        pos += 4
        need(name_len, "name")
        try:
            name = bytes(view[pos:pos + name_len]).decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"checkpoint: invalid UTF-8 name at byte {pos}") from e
        pos += name_len
        need(4, "rank")
        (rank,) = struct.unpack_from("<I", view, pos)
        pos += 4
        need(4 * rank, "dims")
        dims = struct.unpack_from(f"<{rank}I", view, pos)
        pos += 4 * rank
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        need(8 * count, f"payload of {name!r}")
        arr = np.frombuffer(view, dtype="<f8", count=count, offset=pos).copy()
        pos += 8 * count
        if name in out:
            raise FormatError(f"checkpoint: duplicate record {name!r}")
        out[name] = arr.reshape(dims)
    return out


def write_checkpoint(path: str | Path, arrays: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(dump_arrays(arrays))


def read_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    return load_arrays(Path(path).read_bytes())
