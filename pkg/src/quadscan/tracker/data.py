"""Crop extraction, featurization, and training batch sampling.

All three visual modalities are featurized to 3-channel float planes roughly
in [-1, 1] so one shared patch embedding can consume them: RGB and thermal
map bytes through v / 127.5 - 1 (thermal replicated), events use raw polarity.
Crops are bilinear-resampled with zero padding outside the frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from quadscan.boxes import BBox
from quadscan.synthdata.sequence import SyntheticSequence, read_sequence
from quadscan.tracker.model import TrackerConfig


def rgb_plane(seq: SyntheticSequence, t: int) -> np.ndarray:
    return seq.rgb[t].astype(np.float32) / 127.5 - 1.0


def thermal_plane(seq: SyntheticSequence, t: int) -> np.ndarray:
    g = seq.thermal[t].astype(np.float32) / 127.5 - 1.0
    return np.repeat(g[:, :, None], 3, axis=2)


def event_plane(seq: SyntheticSequence, t: int) -> np.ndarray:
    p = seq.event[t].astype(np.float32)
    return np.repeat(p[:, :, None], 3, axis=2)


PLANE_FN = {"rgb": rgb_plane, "tir": thermal_plane, "event": event_plane}


def crop_resize(plane: np.ndarray, center: tuple[float, float], side: float,
                out_px: int) -> np.ndarray:
    """Bilinear crop of a square window around ``center`` resized to out_px."""
    height, width = plane.shape[:2]
    cx, cy = center
    xs = cx - side / 2.0 + (np.arange(out_px) + 0.5) * (side / out_px) - 0.5
    ys = cy - side / 2.0 + (np.arange(out_px) + 0.5) * (side / out_px) - 0.5
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = (xs - x0).astype(np.float32)
    fy = (ys - y0).astype(np.float32)

    def sample(yidx, xidx):
        valid = ((yidx >= 0) & (yidx < height))[:, None] & ((xidx >= 0) & (xidx < width))[None, :]
        yc = np.clip(yidx, 0, height - 1)
        xc = np.clip(xidx, 0, width - 1)
        patch = plane[yc[:, None], xc[None, :]]
        return patch * valid[:, :, None]

    w00 = (1 - fy)[:, None] * (1 - fx)[None, :]
    w01 = (1 - fy)[:, None] * fx[None, :]
    w10 = fy[:, None] * (1 - fx)[None, :]
    w11 = fy[:, None] * fx[None, :]
    out = (
        sample(y0, x0) * w00[:, :, None]
        + sample(y0, x0 + 1) * w01[:, :, None]
        + sample(y0 + 1, x0) * w10[:, :, None]
        + sample(y0 + 1, x0 + 1) * w11[:, :, None]
    )
    return out.astype(np.float32)


def template_side_px(box: BBox, context_factor: float) -> float:
    return context_factor * float(np.sqrt(box.w * box.h))


@dataclass
class CropSpec:
    """Native-pixel crop geometry fixed per sequence at init time."""

    template_side: float
    search_side: float
    scale: float  # crop px per native px at search resolution

    @classmethod
    def from_first_box(cls, box: BBox, cfg: TrackerConfig) -> "CropSpec":
        t_side = template_side_px(box, cfg.context_factor)
        s_side = cfg.search_factor * t_side
        return cls(t_side, s_side, cfg.search_size / s_side)


def extract_group(seq: SyntheticSequence, t: int, center: tuple[float, float],
                  side: float, out_px: int, modalities) -> dict[str, np.ndarray]:
    return {
        m: crop_resize(PLANE_FN[m](seq, t), center, side, out_px)
        for m in modalities if m != "lang"
    }


def box_to_crop(box: BBox, center: tuple[float, float], side: float, scale: float) -> np.ndarray:
    """Map a frame-space box into crop pixels: [x1, y1, w, h]."""
    ox = center[0] - side / 2.0
    oy = center[1] - side / 2.0
    return np.array([
        (box.x1 - ox) * scale,
        (box.y1 - oy) * scale,
        box.w * scale,
        box.h * scale,
    ])


def crop_to_frame(box_crop: np.ndarray, center: tuple[float, float], side: float,
                  scale: float) -> BBox:
    ox = center[0] - side / 2.0
    oy = center[1] - side / 2.0
    w = max(float(box_crop[2] / scale), 1e-3)
    h = max(float(box_crop[3] / scale), 1e-3)
    return BBox(ox + float(box_crop[0]) / scale, oy + float(box_crop[1]) / scale, w, h)


def load_corpus_split(corpus_dir, manifest_name: str) -> list[tuple[str, SyntheticSequence]]:
    from quadscan.synthdata.corpus import read_manifest

    root = Path(corpus_dir)
    return [
        (rel, read_sequence(root / rel))
        for rel in read_manifest(root / manifest_name)
    ]


@dataclass
class TrainBatch:
    templates: dict[str, np.ndarray]   # mod -> (B, T, T, 3)
    searches: dict[str, np.ndarray]    # mod -> (B, S, S, 3)
    sentences: list[str]
    gt_crop: np.ndarray                # (B, 4) in search-crop pixels


class TrainSampler:
    """Draws jittered template/search crop pairs from loaded sequences."""

    def __init__(self, sequences: list[tuple[str, SyntheticSequence]], cfg: TrackerConfig):
        if not sequences:
            raise ValueError("no training sequences")
        self.sequences = sequences
        self.cfg = cfg
        self.specs = [CropSpec.from_first_box(seq.boxes[0], cfg) for _, seq in sequences]
        # template crops are fixed per sequence; cut them once
        self._template_cache = [
            extract_group(seq, 0, seq.boxes[0].center, spec.template_side,
                          cfg.template_size, cfg.modalities)
            for (_, seq), spec in zip(sequences, self.specs)
        ]

    def sample(self, rng: np.random.Generator, batch_size: int) -> TrainBatch:
        cfg = self.cfg
        mods = cfg.modalities
        templates = {m: [] for m in mods if m != "lang"}
        searches = {m: [] for m in mods if m != "lang"}
        sentences: list[str] = []
        gts = []
        for _ in range(batch_size):
            pick = int(rng.integers(len(self.sequences)))
            _, seq = self.sequences[pick]
            spec = self.specs[pick]
            t = int(rng.integers(1, len(seq)))
            gt = seq.boxes[t]
            max_jitter = max(spec.search_side / 2.0 - max(gt.w, gt.h) / 2.0 - 2.0, 0.0)
            jitter = min(spec.search_side / 8.0, max_jitter)
            center = (
                gt.center[0] + float(rng.uniform(-jitter, jitter)),
                gt.center[1] + float(rng.uniform(-jitter, jitter)),
            )
            t_group = self._template_cache[pick]
            s_group = extract_group(seq, t, center, spec.search_side,
                                    cfg.search_size, mods)
            for m in templates:
                templates[m].append(t_group[m])
                searches[m].append(s_group[m])
            sentences.append(seq.sentence)
            gts.append(box_to_crop(gt, center, spec.search_side, spec.scale))
        return TrainBatch(
            templates={m: np.stack(v) for m, v in templates.items()},
            searches={m: np.stack(v) for m, v in searches.items()},
            sentences=sentences,
            gt_crop=np.stack(gts),
        )
