"""Training loop with named schedule presets and reproducible sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from quadscan.errors import ConfigError, NumericError
from quadscan.numerics.checkpoint import save_checkpoint
from quadscan.numerics.optim import AdamW
from quadscan.numerics.tensor import Tape
from quadscan.tracker.data import TrainSampler, load_corpus_split
from quadscan.tracker.loss import tracking_loss
from quadscan.tracker.model import (
    TrackerConfig,
    backbone_forward,
    build_tracker,
    embed,
    gaussian_radius,
    merge_and_predict,
)


@dataclass(frozen=True)
class TrainSchedule:
    epochs: int
    batch_size: int
    lr: float
    lr_decay_epoch: int
    lr_decay: float
    weight_decay: float
    sequence_repeats: int = 1


# "paper": the full-scale reference schedule; "toy": tuned for the synthetic corpus.
PRESETS = {
    "paper": TrainSchedule(
        epochs=15, batch_size=24, lr=1e-5,
        lr_decay_epoch=6, lr_decay=0.1, weight_decay=1e-4,
    ),
    "toy": TrainSchedule(
        epochs=30, batch_size=8, lr=3e-4,
        lr_decay_epoch=24, lr_decay=0.1, weight_decay=1e-4,
        sequence_repeats=4,
    ),
}


def get_preset(name: str) -> TrainSchedule:
    if name not in PRESETS:
        raise ConfigError(f"unknown schedule preset '{name}'; valid: {list(PRESETS)}")
    return PRESETS[name]


@dataclass
class TrainResult:
    checkpoint_path: Path
    curve_path: Path
    final_loss: float
    steps: int


def _abort_with_dump(out: Path, step: int, epoch: int, lr: float, detail: str) -> NumericError:
    dump = out / "diagnostic_dump.txt"
    dump.write_text(
        f"non-finite loss at step {step} (epoch {epoch})\n"
        f"lr = {lr!r}\n{detail}\n"
    )
    return NumericError(f"non-finite loss at step {step}; dump at {dump}")


def train(corpus_dir, config: TrackerConfig, schedule: TrainSchedule,
          seed: int, out_dir) -> TrainResult:
    """Train on the corpus train split; emits model.qtck and loss_curve.csv.

    Identical (corpus, config, schedule, seed) runs produce byte-identical
    outputs. A non-finite loss aborts with a diagnostic dump.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sequences = load_corpus_split(corpus_dir, "train.txt")
    sampler = TrainSampler(sequences, config)
    model = build_tracker(config, seed)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 2]))
    tensors = model.tensors()
    optimizer = AdamW(tensors, lr=schedule.lr, weight_decay=schedule.weight_decay)
    radius = gaussian_radius(config)
    dtype = config.np_dtype

    steps_per_epoch = max(
        1, math.ceil(len(sequences) * schedule.sequence_repeats / schedule.batch_size)
    )
    curve_rows = ["step,epoch,lr,total,cls,iou,l1"]
    step = 0
    final_loss = float("nan")
    for epoch in range(1, schedule.epochs + 1):
        lr = schedule.lr * (schedule.lr_decay if epoch > schedule.lr_decay_epoch else 1.0)
        optimizer.lr = lr
        for _ in range(steps_per_epoch):
            step += 1
            batch = sampler.sample(rng, schedule.batch_size)
            try:
                with Tape(dtype=dtype) as tape:
                    tokens = embed(model, batch.templates, batch.searches, batch.sentences)
                    tokens = backbone_forward(model, tokens)
                    head, _ = merge_and_predict(model, tokens)
                    terms = tracking_loss(
                        head, batch.gt_crop, radius,
                        iou_weight=config.iou_weight, l1_weight=config.l1_weight,
                    )
                loss_value = float(terms.total.data)
            except NumericError as exc:
                raise _abort_with_dump(out, step, epoch, lr, str(exc)) from exc
            if not math.isfinite(loss_value):
                detail = (
                    f"cls = {float(terms.cls.data)!r}\n"
                    f"iou = {float(terms.iou.data)!r}\n"
                    f"l1 = {float(terms.l1.data)!r}"
                )
                raise _abort_with_dump(out, step, epoch, lr, detail)
            tape.backward(terms.total)
            grads = {
                name: (t.grad if t.grad is not None else np.zeros_like(t.data))
                for name, t in tensors.items()
            }
            optimizer.step(grads)
            for t in tensors.values():
                t.grad = None
            curve_rows.append(
                f"{step},{epoch},{lr!r},{loss_value!r},"
                f"{float(terms.cls.data)!r},{float(terms.iou.data)!r},{float(terms.l1.data)!r}"
            )
            final_loss = loss_value

    curve_path = out / "loss_curve.csv"
    curve_path.write_text("\n".join(curve_rows) + "\n")
    checkpoint_path = out / "model.qtck"
    save_checkpoint(checkpoint_path, model.tensors())
    return TrainResult(
        checkpoint_path=checkpoint_path,
        curve_path=curve_path,
        final_loss=final_loss,
        steps=step,
    )
