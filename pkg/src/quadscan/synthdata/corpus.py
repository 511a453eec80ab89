"""Corpus building: per-scenario counts, disjoint train/test split, manifests.

The split keeps scenario proportions equal across splits within one sequence:
per-scenario train counts come from a largest-remainder apportionment whose
total is round(total * train_fraction). Manifests are sorted, newline
terminated, and relative to the corpus root.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from quadscan.errors import ConfigError
from quadscan.synthdata.generator import SCENARIOS, ScenarioConfig, generate
from quadscan.synthdata.sequence import write_sequence

SEQUENCE_SUBDIR = "seqs"


@dataclass(frozen=True)
class CorpusSpec:
    counts: dict[str, int]
    train_fraction: float = 0.8
    frames: int = 24
    resolution: int = 128

    def __post_init__(self):
        unknown = [s for s in self.counts if s not in SCENARIOS]
        if unknown:
            raise ConfigError(f"unknown scenario '{unknown[0]}'; valid: {list(SCENARIOS)}")
        if not self.counts or all(c == 0 for c in self.counts.values()):
            raise ConfigError("corpus spec lists no sequences")
        if any(c < 0 for c in self.counts.values()):
            raise ConfigError("scenario counts must be non-negative")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be in (0, 1)")

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def default_corpus_spec() -> CorpusSpec:
    """Benchmark corpus: 36 train / 60 test, a quarter of the test set
    overexposed and a quarter low-light."""
    return CorpusSpec(
        counts={
            "plain": 16,
            "overexposed-rgb": 24,
            "low-light": 24,
            "similar-distractors": 16,
            "static-target": 16,
        },
        train_fraction=0.375,
        frames=20,
        resolution=128,
    )


def mini_corpus_spec() -> CorpusSpec:
    """Tiny corpus for smoke tests."""
    return CorpusSpec(
        counts={"plain": 2, "static-target": 2},
        train_fraction=0.5,
        frames=6,
        resolution=64,
    )


NAMED_SPECS = {"default": default_corpus_spec, "mini": mini_corpus_spec}


def parse_corpus_spec(path) -> CorpusSpec:
    """Read a key=value spec file: count.<scenario>, train_fraction, frames, resolution."""
    counts: dict[str, int] = {}
    fields = {"train_fraction": 0.8, "frames": 24.0, "resolution": 128.0}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("count."):
            scenario = key[len("count."):]
            try:
                counts[scenario] = int(value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{line_no}: bad count {value!r}") from exc
        elif key in fields:
            try:
                fields[key] = float(value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{line_no}: bad value {value!r}") from exc
        else:
            raise ConfigError(f"{path}:{line_no}: unknown key '{key}'")
    return CorpusSpec(
        counts=counts,
        train_fraction=fields["train_fraction"],
        frames=int(fields["frames"]),
        resolution=int(fields["resolution"]),
    )


def split_counts(spec: CorpusSpec) -> dict[str, tuple[int, int]]:
    """Per-scenario (train, test) counts via largest-remainder apportionment."""
    ordered = [s for s in SCENARIOS if spec.counts.get(s, 0) > 0]
    target_train = round(spec.total * spec.train_fraction)
    quotas = {s: spec.counts[s] * spec.train_fraction for s in ordered}
    base = {s: int(np.floor(quotas[s])) for s in ordered}
    leftover = target_train - sum(base.values())
    by_remainder = sorted(ordered, key=lambda s: (-(quotas[s] - base[s]), ordered.index(s)))
    for s in by_remainder[:leftover]:
        base[s] += 1
    return {s: (base[s], spec.counts[s] - base[s]) for s in ordered}


def make_corpus(spec: CorpusSpec, seed: int, out_dir) -> tuple[Path, Path]:
    """Generate all sequences and write train.txt / test.txt manifests."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    split = split_counts(spec)
    train_rel: list[str] = []
    test_rel: list[str] = []
    for scenario_idx, scenario in enumerate(SCENARIOS):
        if scenario not in split:
            continue
        n_train, n_test = split[scenario]
        config = ScenarioConfig(
            scenario=scenario, resolution=spec.resolution, frames=spec.frames
        )
        for i in range(n_train + n_test):
            seq_seed = np.random.SeedSequence(
                [int(seed), scenario_idx, i]
            ).generate_state(1)[0]
            seq = generate(config, int(seq_seed))
            rel = f"{SEQUENCE_SUBDIR}/{scenario}-{i:03d}"
            write_sequence(seq, root / rel)
            (train_rel if i < n_train else test_rel).append(rel)
    train_path = root / "train.txt"
    test_path = root / "test.txt"
    train_path.write_text("".join(line + "\n" for line in sorted(train_rel)))
    test_path.write_text("".join(line + "\n" for line in sorted(test_rel)))
    return train_path, test_path


def read_manifest(path) -> list[str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return [line.strip() for line in text.splitlines() if line.strip()]
