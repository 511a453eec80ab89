"""Binary PPM (P6) and PGM (P5) readers/writers, bit-exact round trip."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from quadscan.errors import DataFormatError


def _write_pnm(path, magic: bytes, arr: np.ndarray) -> None:
    height, width = arr.shape[:2]
    header = b"%s\n%d %d\n255\n" % (magic, width, height)
    Path(path).write_bytes(header + arr.astype(np.uint8).tobytes(order="C"))


def write_ppm(path, rgb: np.ndarray) -> None:
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DataFormatError(f"{path}: PPM needs (H, W, 3) data, got {rgb.shape}")
    _write_pnm(path, b"P6", rgb)


def write_pgm(path, gray: np.ndarray) -> None:
    if gray.ndim != 2:
        raise DataFormatError(f"{path}: PGM needs (H, W) data, got {gray.shape}")
    _write_pnm(path, b"P5", gray)


def _read_pnm(path, expected_magic: bytes) -> np.ndarray:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    fields: list[bytes] = []
    offset = 0
    line_no = 1
    # header = magic, width, height, maxval; '#' comment lines allowed
    while len(fields) < 4:
        end = blob.find(b"\n", offset)
        if end < 0:
            raise DataFormatError(f"{path}:{line_no}: truncated header")
        line = blob[offset:end]
        offset = end + 1
        if not line.startswith(b"#"):
            fields.extend(line.split())
        line_no += 1
    magic, *dims = fields[:4]
    if magic != expected_magic:
        raise DataFormatError(
            f"{path}:1: magic {magic!r} does not match expected {expected_magic!r}"
        )
    try:
        width, height, maxval = (int(d) for d in dims)
    except ValueError as exc:
        raise DataFormatError(f"{path}: non-integer header field {dims}") from exc
    if maxval != 255:
        raise DataFormatError(f"{path}: only maxval 255 supported, got {maxval}")
    channels = 3 if expected_magic == b"P6" else 1
    count = width * height * channels
    payload = blob[offset:offset + count]
    if len(payload) != count:
        raise DataFormatError(
            f"{path}: payload has {len(payload)} bytes, expected {count}"
        )
    arr = np.frombuffer(payload, dtype=np.uint8)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return arr.reshape(shape).copy()


def read_ppm(path) -> np.ndarray:
    return _read_pnm(path, b"P6")


def read_pgm(path) -> np.ndarray:
    return _read_pnm(path, b"P5")
