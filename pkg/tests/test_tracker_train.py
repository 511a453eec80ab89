"""Schedules, training determinism, abort behavior, tracking protocol."""

import pytest

from quadscan.errors import ConfigError, NumericError
from quadscan.synthdata.sequence import read_sequence
from quadscan.tracker import (
    PRESETS,
    TrackerConfig,
    TrainSchedule,
    get_preset,
    load_tracker,
    track_sequence,
    train,
)


def micro_config(**kwargs):
    defaults = dict(
        search_size=32, template_size=16, patch_size=8, embed_dim=12, depth=1,
        fusion_blocks=(0,), fusion_expand=1, state_dim=2, conv_width=2,
        head_hidden=8,
    )
    defaults.update(kwargs)
    return TrackerConfig(**defaults)


MICRO_SCHED = TrainSchedule(
    epochs=2, batch_size=4, lr=3e-4, lr_decay_epoch=2, lr_decay=0.1,
    weight_decay=1e-4, sequence_repeats=1,
)


def test_paper_preset_values():
    paper = get_preset("paper")
    assert paper.epochs == 15
    assert paper.batch_size == 24
    assert paper.lr == 1e-5
    assert paper.lr_decay_epoch == 6
    assert paper.lr_decay == 0.1
    assert paper.weight_decay == 1e-4


def test_toy_preset_values():
    toy = get_preset("toy")
    assert toy.epochs == 30
    assert toy.batch_size == 8
    assert toy.lr == 3e-4
    assert "toy" in PRESETS and "paper" in PRESETS
    with pytest.raises(ConfigError):
        get_preset("warp")


def test_training_is_bitwise_deterministic(mini_corpus, tmp_path):
    cfg = micro_config()
    r1 = train(mini_corpus, cfg, MICRO_SCHED, seed=7, out_dir=tmp_path / "a")
    r2 = train(mini_corpus, cfg, MICRO_SCHED, seed=7, out_dir=tmp_path / "b")
    assert r1.checkpoint_path.read_bytes() == r2.checkpoint_path.read_bytes()
    assert r1.curve_path.read_text() == r2.curve_path.read_text()
    r3 = train(mini_corpus, cfg, MICRO_SCHED, seed=8, out_dir=tmp_path / "c")
    assert r3.checkpoint_path.read_bytes() != r1.checkpoint_path.read_bytes()


def test_loss_curve_format_and_decrease(mini_corpus, tmp_path):
    cfg = micro_config()
    sched = TrainSchedule(epochs=10, batch_size=4, lr=1e-3, lr_decay_epoch=8,
                          lr_decay=0.1, weight_decay=1e-4, sequence_repeats=2)
    result = train(mini_corpus, cfg, sched, seed=3, out_dir=tmp_path / "run")
    lines = result.curve_path.read_text().splitlines()
    assert lines[0] == "step,epoch,lr,total,cls,iou,l1"
    first = float(lines[1].split(",")[3])
    last = float(lines[-1].split(",")[3])
    assert last < first
    assert result.steps == len(lines) - 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_aborts_with_dump(mini_corpus, tmp_path):
    cfg = micro_config()
    wild = TrainSchedule(epochs=3, batch_size=4, lr=1e18, lr_decay_epoch=3,
                         lr_decay=1.0, weight_decay=0.0, sequence_repeats=2)
    with pytest.raises(NumericError):
        train(mini_corpus, cfg, wild, seed=0, out_dir=tmp_path / "blow")
    dump = tmp_path / "blow" / "diagnostic_dump.txt"
    assert dump.exists()
    assert "non-finite loss" in dump.read_text()


def test_tracking_initializes_from_ground_truth(mini_corpus, tmp_path):
    cfg = micro_config()
    result = train(mini_corpus, cfg, MICRO_SCHED, seed=1, out_dir=tmp_path / "t")
    model = load_tracker(cfg, result.checkpoint_path)
    rel = (mini_corpus / "test.txt").read_text().split()[0]
    seq = read_sequence(mini_corpus / rel)
    track = track_sequence(model, seq, rel)
    assert track.predictions[0].as_tuple() == seq.boxes[0].as_tuple()
    assert len(track.predictions) == len(seq)


def test_checkpoint_config_mismatch_detected(mini_corpus, tmp_path):
    from quadscan.errors import ShapeError

    cfg = micro_config()
    result = train(mini_corpus, cfg, MICRO_SCHED, seed=1, out_dir=tmp_path / "m")
    other = micro_config(embed_dim=16)
    with pytest.raises(ShapeError):
        load_tracker(other, result.checkpoint_path)
