"""Axis-aligned boxes in [x1, y1, w, h] pixel convention, plus overlap math."""

from __future__ import annotations

from dataclasses import dataclass

from quadscan.errors import InputError


@dataclass(frozen=True)
class BBox:
    """Top-left corner, width and height, in pixels of the full frame."""

    x1: float
    y1: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise InputError(f"degenerate box w={self.w}, h={self.h}")

    @property
    def x2(self) -> float:
        return self.x1 + self.w

    @property
    def y2(self) -> float:
        return self.y1 + self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x1 + self.w / 2.0, self.y1 + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.w, self.h)


def iou(a: BBox, b: BBox) -> float:
    """Intersection area over union area, in [0, 1]."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def giou(a: BBox, b: BBox) -> float:
    """Generalized IoU: IoU minus the enclosing box's empty fraction, in (-1, 1]."""
    iw = max(0.0, min(a.x2, b.x2) - max(a.x1, b.x1))
    ih = max(0.0, min(a.y2, b.y2) - max(a.y1, b.y1))
    inter = iw * ih
    union = a.area + b.area - inter
    cw = max(a.x2, b.x2) - min(a.x1, b.x1)
    ch = max(a.y2, b.y2) - min(a.y1, b.y1)
    enclose = cw * ch
    return inter / union - (enclose - union) / enclose


def center_distance(a: BBox, b: BBox) -> float:
    ax, ay = a.center
    bx, by = b.center
    return ((ax - bx) ** 2 + (ay - by) ** 2) ** 0.5
