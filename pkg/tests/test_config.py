"""Run configuration: parsing, overrides, provenance, schedule merging."""

import pytest

from quadscan.config import RunConfig
from quadscan.errors import ConfigError


def test_defaults_build_toy_tracker():
    cfg = RunConfig.load()
    tracker = cfg.tracker_config()
    assert tracker.search_size == 64
    assert tracker.modalities == ("rgb", "tir", "event", "lang")
    assert tracker.fusion_paths == ("forward", "backward", "region", "token")
    assert cfg.schedule().epochs == 30


def test_file_values_and_comments(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# comment line\n"
        "model.embed_dim = 48   # trailing comment\n"
        "modalities = rgb,t\n"
        "mfm.paths = forward,backward\n"
    )
    cfg = RunConfig.load(path)
    assert cfg.get("model.embed_dim") == 48
    assert cfg.modalities() == ("rgb", "tir")
    assert cfg.fusion_paths() == ("forward", "backward")
    assert cfg.provenance["model.embed_dim"] == f"file:{path}"
    assert cfg.provenance["model.depth"] == "default"


def test_unknown_keys_rejected(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("model.embed_dimension = 48\n")
    with pytest.raises(ConfigError, match="embed_dimension"):
        RunConfig.load(path)
    with pytest.raises(ConfigError):
        RunConfig.load(overrides=["nope=1"])


def test_cli_overrides_take_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("seed = 5\n")
    cfg = RunConfig.load(path, overrides=["seed=9", "train.preset=paper"])
    assert cfg.get("seed") == 9
    assert cfg.provenance["seed"] == "cli"
    sched = cfg.schedule()
    assert sched.epochs == 15 and sched.batch_size == 24 and sched.lr == 1e-5


def test_schedule_field_overrides():
    cfg = RunConfig.load(overrides=["train.preset=paper", "train.epochs=3", "train.lr=0.01"])
    sched = cfg.schedule()
    assert sched.epochs == 3
    assert sched.lr == 0.01
    assert sched.weight_decay == 1e-4  # from the preset


def test_modality_aliases_and_validation():
    cfg = RunConfig.load(overrides=["modalities=rgb,t,e,l"])
    assert cfg.modalities() == ("rgb", "tir", "event", "lang")
    cfg = RunConfig.load(overrides=["modalities=e,rgb"])
    assert cfg.modalities() == ("rgb", "event")
    with pytest.raises(ConfigError, match="sonar"):
        RunConfig.load(overrides=["modalities=rgb,sonar"]).modalities()
    with pytest.raises(ConfigError):
        RunConfig.load(overrides=["mfm.paths=forward,diagonal"]).fusion_paths()


def test_bad_value_types_rejected():
    with pytest.raises(ConfigError):
        RunConfig.load(overrides=["model.depth=two"])
    with pytest.raises(ConfigError):
        RunConfig.load(overrides=["train.lr=fast"]).schedule()


def test_resolved_text_lists_every_key_with_provenance():
    cfg = RunConfig.load(overrides=["seed=3"])
    text = cfg.resolved_text()
    assert "seed = 3  # cli" in text
    assert "model.embed_dim = 32  # default" in text
    assert len(text.splitlines()) == len(cfg.values)


def test_malformed_line_rejected(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("just words\n")
    with pytest.raises(ConfigError, match="key = value"):
        RunConfig.load(path)
