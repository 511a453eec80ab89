"""Bit-exact binary checkpoint files.

Layout: magic b"QTCK", version u32 LE, then per record:
name length u32 LE, UTF-8 name, ndim u32 LE, each dim u32 LE,
raw float32 little-endian payload in row-major order.
Records are written in sorted name order so files are reproducible.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from quadscan.errors import DataFormatError

MAGIC = b"QTCK"
VERSION = 1


def save_checkpoint(path, params) -> None:
    """Write name -> array (or Tensor) mapping; payload is cast to float32."""
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    for name in sorted(params):
        value = params[name]
        arr = np.ascontiguousarray(
            getattr(value, "data", value), dtype="<f4"
        )
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", arr.ndim))
        for dim in arr.shape:
            chunks.append(struct.pack("<I", dim))
        chunks.append(arr.tobytes(order="C"))
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    """Read a checkpoint back into a name -> float32 ndarray dict."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    if blob[:4] != MAGIC:
        raise DataFormatError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    offset = 4

    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise DataFormatError(f"{path}: truncated at byte {offset}")
        piece = blob[offset:offset + n]
        offset += n
        return piece

    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    out: dict[str, np.ndarray] = {}
    while offset < len(blob):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4))
        shape = tuple(struct.unpack("<I", take(4))[0] for _ in range(ndim))
        count = int(np.prod(shape)) if shape else 1
        payload = take(count * 4)
        out[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
    return out
