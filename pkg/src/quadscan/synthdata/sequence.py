"""Sequence container plus the on-disk directory layout.

Layout: rgb/%06d.ppm, tir/%06d.pgm, event/%06d.pgm, groundtruth.txt
(one "x1,y1,w,h" line per frame), language.txt (one sentence),
attributes.txt (one tag per line). Event rasters store polarity as
bytes: above 128 positive, 128 zero, below 128 negative.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from quadscan.boxes import BBox
from quadscan.errors import DataFormatError
from quadscan.synthdata.pnm import read_pgm, read_ppm, write_pgm, write_ppm

EVENT_ZERO = 128
EVENT_POS = 255
EVENT_NEG = 0


@dataclass
class SyntheticSequence:
    """Quad-modal frame groups with ground truth and free-form attribute tags."""

    rgb: np.ndarray      # (T, H, W, 3) uint8
    thermal: np.ndarray  # (T, H, W) uint8
    event: np.ndarray    # (T, H, W) int8 polarity in {-1, 0, +1}
    sentence: str
    boxes: list[BBox]
    tags: tuple[str, ...] = ()

    def __len__(self) -> int:
        return int(self.rgb.shape[0])


def events_from_rgb(rgb: np.ndarray, threshold: int = 12) -> np.ndarray:
    """Per-pixel brightness-change polarity between consecutive frames.

    Frame 0 has no predecessor and is all zero. Luma is the integer mean of
    the three channels so reconstruction from stored bytes is exact.
    """
    luma = rgb.astype(np.int32).sum(axis=-1) // 3
    out = np.zeros(luma.shape, dtype=np.int8)
    diff = luma[1:] - luma[:-1]
    out[1:][diff > threshold] = 1
    out[1:][diff < -threshold] = -1
    return out


def event_bytes(polarity: np.ndarray) -> np.ndarray:
    out = np.full(polarity.shape, EVENT_ZERO, dtype=np.uint8)
    out[polarity > 0] = EVENT_POS
    out[polarity < 0] = EVENT_NEG
    return out


def event_polarity(raster: np.ndarray) -> np.ndarray:
    out = np.zeros(raster.shape, dtype=np.int8)
    out[raster > EVENT_ZERO] = 1
    out[raster < EVENT_ZERO] = -1
    return out


def _format_number(v: float) -> str:
    f = float(v)
    return str(int(f)) if f.is_integer() else repr(f)


def write_sequence(seq: SyntheticSequence, directory) -> None:
    root = Path(directory)
    for sub in ("rgb", "tir", "event"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for t in range(len(seq)):
        write_ppm(root / "rgb" / f"{t:06d}.ppm", seq.rgb[t])
        write_pgm(root / "tir" / f"{t:06d}.pgm", seq.thermal[t])
        write_pgm(root / "event" / f"{t:06d}.pgm", event_bytes(seq.event[t]))
    lines = [",".join(_format_number(v) for v in box.as_tuple()) for box in seq.boxes]
    (root / "groundtruth.txt").write_text("\n".join(lines) + "\n")
    (root / "language.txt").write_text(seq.sentence + "\n")
    (root / "attributes.txt").write_text("".join(tag + "\n" for tag in seq.tags))


def _read_boxes(path: Path) -> list[BBox]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    boxes = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise DataFormatError(f"{path}:{line_no}: expected 4 fields, got {len(parts)}")
        try:
            x1, y1, w, h = (float(p) for p in parts)
        except ValueError as exc:
            raise DataFormatError(f"{path}:{line_no}: non-numeric field in {line!r}") from exc
        boxes.append(BBox(x1, y1, w, h))
    if not boxes:
        raise DataFormatError(f"{path}: no annotation lines")
    return boxes


def read_sequence(directory) -> SyntheticSequence:
    root = Path(directory)
    boxes = _read_boxes(root / "groundtruth.txt")
    lang_path = root / "language.txt"
    if not lang_path.exists():
        raise DataFormatError(f"{lang_path}: missing language annotation")
    sentence = lang_path.read_text().strip()
    attr_path = root / "attributes.txt"
    if not attr_path.exists():
        raise DataFormatError(f"{attr_path}: missing attribute tags")
    tags = tuple(line.strip() for line in attr_path.read_text().splitlines() if line.strip())
    rgb, thermal, event = [], [], []
    for t in range(len(boxes)):
        rgb.append(read_ppm(root / "rgb" / f"{t:06d}.ppm"))
        thermal.append(read_pgm(root / "tir" / f"{t:06d}.pgm"))
        event.append(event_polarity(read_pgm(root / "event" / f"{t:06d}.pgm")))
    return SyntheticSequence(
        rgb=np.stack(rgb),
        thermal=np.stack(thermal),
        event=np.stack(event),
        sentence=sentence,
        boxes=boxes,
        tags=tags,
    )
