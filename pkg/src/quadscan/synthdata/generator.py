"""Deterministic scenario generator for quad-modal sequences.

Each scenario makes a controlled subset of modalities informative:

  plain                everything visible
  overexposed-rgb      RGB saturates to white; the target crawls, so events
                       are sparse and thermal carries the sequence
  low-light            RGB near black and the target temperature sits at the
                       background level (thermal crossover); events carry it
  similar-distractors  static same-colored distractors; thermal and motion
                       disambiguate
  static-target        nothing moves, so event rasters are exactly zero

RGB noise is a per-sequence pattern frozen across frames, which keeps event
rasters a pure function of object motion. Event rasters always come from the
clean (pre-degradation) quantized RGB frames, so reconstructing them from the
stored RGB matches exactly on scenarios that do not degrade RGB.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from quadscan.boxes import BBox
from quadscan.errors import ConfigError
from quadscan.synthdata.sequence import SyntheticSequence, events_from_rgb

SCENARIOS = (
    "plain",
    "overexposed-rgb",
    "low-light",
    "similar-distractors",
    "static-target",
)

SCENARIO_TAGS = {
    "plain": (),
    "overexposed-rgb": ("OE",),
    "low-light": ("LI", "TC"),
    "similar-distractors": ("SA",),
    "static-target": ("NM",),
}

PALETTE = (
    ("red", (205, 55, 55)),
    ("green", (60, 185, 70)),
    ("blue", (60, 90, 205)),
    ("yellow", (215, 200, 60)),
    ("magenta", (190, 65, 190)),
    ("cyan", (65, 190, 190)),
    ("orange", (225, 140, 50)),
)

EVENT_THRESHOLD = 12


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    resolution: int = 128
    frames: int = 24
    event_threshold: int = EVENT_THRESHOLD

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(
                f"unknown scenario '{self.scenario}'; valid: {list(SCENARIOS)}"
            )
        if self.resolution < 32 or self.frames < 2:
            raise ConfigError("need resolution >= 32 and at least 2 frames")


def _draw_rect(canvas: np.ndarray, x: int, y: int, w: int, h: int,
               color: np.ndarray, stripes: bool) -> None:
    patch = np.broadcast_to(color, (h, w, 3)).astype(np.float64).copy()
    if stripes:
        patch[::2] = np.maximum(patch[::2] - 60.0, 35.0)
    canvas[y:y + h, x:x + w] = patch


def _direction_word(vx: float, vy: float) -> str:
    if abs(vx) >= abs(vy):
        return "right" if vx >= 0 else "left"
    return "down" if vy >= 0 else "up"


def generate(config: ScenarioConfig, seed: int) -> SyntheticSequence:
    """Render one sequence; identical (config, seed) gives identical output."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    res = config.resolution
    scenario = config.scenario

    # static scene layers, frozen for the whole sequence
    bg_color = rng.uniform(45, 90, size=3)
    ramp = np.linspace(0.0, 1.0, res)
    grad = rng.uniform(-18, 18) * ramp[:, None, None] + rng.uniform(-18, 18) * ramp[None, :, None]
    noise = rng.integers(-6, 7, size=(res, res, 3)).astype(np.float64)
    base_rgb = np.clip(bg_color + grad + noise, 25, 230)

    bg_temp = rng.uniform(55, 95)
    temp_grad = rng.uniform(-8, 8) * ramp[:, None] + rng.uniform(-8, 8) * ramp[None, :]
    temp_noise = rng.integers(-3, 4, size=(res, res)).astype(np.float64)
    base_temp = np.clip(bg_temp + temp_grad + temp_noise, 10, 245)

    color_name, color = PALETTE[int(rng.integers(len(PALETTE)))]
    color = np.asarray(color, dtype=np.float64)
    w = int(rng.integers(13, 21))
    h = int(rng.integers(13, 21))
    shape_word = "square" if abs(w - h) <= 2 else "box"

    margin = 4
    x = float(rng.uniform(margin, res - margin - w))
    y = float(rng.uniform(margin, res - margin - h))
    if scenario == "static-target":
        speed = 0.0
    elif scenario == "overexposed-rgb":
        speed = rng.uniform(0.22, 0.42)
    else:
        speed = rng.uniform(1.3, 2.4)
    angle = rng.uniform(0, 2 * np.pi)
    vx, vy = speed * np.cos(angle), speed * np.sin(angle)

    if scenario == "low-light":
        target_temp = np.clip(bg_temp + rng.uniform(-4, 4), 10, 245)
    else:
        target_temp = rng.uniform(195, 235)

    distractors: list[tuple[int, int]] = []
    if scenario == "similar-distractors":
        for _ in range(3):
            dx = int(rng.integers(margin, res - margin - w))
            dy = int(rng.integers(margin, res - margin - h))
            distractors.append((dx, dy))
    distractor_temp = np.clip(bg_temp + rng.uniform(2, 8), 10, 245)

    if speed == 0.0:
        sentence = f"the {color_name} {shape_word} standing still"
    else:
        sentence = f"the {color_name} {shape_word} moving {_direction_word(vx, vy)}"

    rgb_clean = np.empty((config.frames, res, res, 3), dtype=np.uint8)
    thermal = np.empty((config.frames, res, res), dtype=np.uint8)
    boxes: list[BBox] = []
    for t in range(config.frames):
        canvas = base_rgb.copy()
        temp = base_temp.copy()
        for dx, dy in distractors:
            _draw_rect(canvas, dx, dy, w, h, color, stripes=True)
            temp[dy:dy + h, dx:dx + w] = distractor_temp
        xi, yi = int(round(x)), int(round(y))
        _draw_rect(canvas, xi, yi, w, h, color, stripes=True)
        temp[yi:yi + h, xi:xi + w] = target_temp
        # cheap separable box blur so thermal blobs have soft edges
        temp = (temp + np.roll(temp, 1, 0) + np.roll(temp, -1, 0)) / 3.0
        temp = (temp + np.roll(temp, 1, 1) + np.roll(temp, -1, 1)) / 3.0
        rgb_clean[t] = np.clip(np.rint(canvas), 0, 255).astype(np.uint8)
        thermal[t] = np.clip(np.rint(temp), 0, 255).astype(np.uint8)
        boxes.append(BBox(float(xi), float(yi), float(w), float(h)))

        x += vx
        y += vy
        if x < margin or x + w > res - margin:
            vx = -vx
            x = float(np.clip(x, margin, res - margin - w))
        if y < margin or y + h > res - margin:
            vy = -vy
            y = float(np.clip(y, margin, res - margin - h))

    event = events_from_rgb(rgb_clean, threshold=config.event_threshold)

    if scenario == "overexposed-rgb":
        rgb_out = np.clip(rgb_clean.astype(np.int32) * 6 + 120, 0, 255).astype(np.uint8)
    elif scenario == "low-light":
        rgb_out = (rgb_clean.astype(np.float64) * 0.02).astype(np.uint8)
    else:
        rgb_out = rgb_clean

    return SyntheticSequence(
        rgb=rgb_out,
        thermal=thermal,
        event=event,
        sentence=sentence,
        boxes=boxes,
        tags=SCENARIO_TAGS[scenario],
    )
