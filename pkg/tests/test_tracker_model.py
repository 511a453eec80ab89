"""Embedding arithmetic, stream isolation, merge/decode behavior."""

import numpy as np
import pytest

from quadscan.errors import ConfigError, InputError
from quadscan.tracker import (
    TrackerConfig,
    backbone_forward,
    build_tracker,
    decode_boxes,
    embed,
    encode_targets,
    merge_and_predict,
    patchify,
    sentence_to_ids,
    set_fusion_paths,
)


def toy_config(**kwargs):
    defaults = dict(
        search_size=64, template_size=32, patch_size=8, embed_dim=16, depth=2,
        fusion_blocks=(1,), fusion_expand=1, state_dim=4, conv_width=3,
        head_hidden=16,
    )
    defaults.update(kwargs)
    return TrackerConfig(**defaults)


def make_inputs(rng, cfg, batch=2):
    visual = [m for m in cfg.modalities if m != "lang"]
    t = {m: rng.uniform(-1, 1, (batch, cfg.template_size, cfg.template_size, 3)).astype(np.float32)
         for m in visual}
    s = {m: rng.uniform(-1, 1, (batch, cfg.search_size, cfg.search_size, 3)).astype(np.float32)
         for m in visual}
    sentences = ["the red square moving left"] * batch
    return t, s, sentences


def test_toy_geometry_arithmetic():
    cfg = toy_config()
    assert cfg.search_tokens == 64
    assert cfg.template_tokens == 16
    assert cfg.tokens_per_stream == 80
    assert cfg.geometry.total_tokens == 320


def test_published_scale_geometry():
    from quadscan.scanorders import TokenGeometry

    geo = TokenGeometry.from_template(4, 64)
    assert geo.total_tokens == 1280
    assert geo.tokens_per_stream == 320
    assert geo.search_tokens == 256


def test_config_validation():
    with pytest.raises(ConfigError):
        toy_config(template_size=20)          # not half the search side
    with pytest.raises(ConfigError):
        toy_config(patch_size=7)
    with pytest.raises(ConfigError):
        toy_config(modalities=("tir", "lang"))  # language needs rgb
    with pytest.raises(ConfigError):
        toy_config(fusion_blocks=(5,))
    cfg = toy_config(modalities=("event", "rgb"))
    assert cfg.modalities == ("rgb", "event")  # canonical ordering


def test_zero_image_tokens_are_bias_plus_positions(rng):
    cfg = toy_config(modalities=("rgb",))
    model = build_tracker(cfg, seed=0)
    zeros_t = {"rgb": np.zeros((1, 32, 32, 3), np.float32)}
    zeros_s = {"rgb": np.zeros((1, 64, 64, 3), np.float32)}
    tokens = embed(model, zeros_t, zeros_s, None)
    stream = tokens.streams["rgb"].data[0]
    bias = model.params["patch_bias"].data
    expected_t = bias + model.params["pos_template"].data
    expected_s = bias + model.params["pos_search"].data
    np.testing.assert_allclose(stream[:16], expected_t, atol=1e-6)
    np.testing.assert_allclose(stream[16:], expected_s, atol=1e-6)


def test_patchify_raster_order():
    img = np.arange(16, dtype=np.float32).reshape(1, 4, 4, 1)
    img3 = np.repeat(img, 3, axis=3)
    patches = patchify(img3, 2)
    assert patches.shape == (1, 4, 12)
    np.testing.assert_array_equal(patches[0, 0, :4:3], [0.0, 1.0])  # top-left patch first


def test_language_stream_starts_as_rgb_search_copy(rng):
    cfg = toy_config()
    model = build_tracker(cfg, seed=0)
    t, s, sentences = make_inputs(rng, cfg)
    tokens = embed(model, t, s, sentences)
    lang = tokens.streams["lang"].data
    rgb = tokens.streams["rgb"].data
    np.testing.assert_array_equal(lang[:, 16:], rgb[:, 16:])
    assert sentence_to_ids("the red square moving left").tolist() != [0] * 5
    assert sentence_to_ids("zorp blip").tolist() == [0, 0]


def test_missing_sentences_rejected(rng):
    cfg = toy_config()
    model = build_tracker(cfg, seed=0)
    t, s, _ = make_inputs(rng, cfg)
    with pytest.raises(InputError):
        embed(model, t, s, None)


def test_isolation_without_fusion_is_bitwise(rng):
    cfg = toy_config(fusion_blocks=())
    model = build_tracker(cfg, seed=1)
    t, s, sentences = make_inputs(rng, cfg, batch=1)
    base = backbone_forward(model, embed(model, t, s, sentences))
    t2 = {m: v.copy() for m, v in t.items()}
    s2 = {m: v.copy() for m, v in s.items()}
    t2["tir"] += 0.5
    s2["tir"] -= 0.25
    probed = backbone_forward(model, embed(model, t2, s2, sentences))
    assert np.array_equal(base.streams["rgb"].data, probed.streams["rgb"].data)
    assert np.array_equal(base.streams["event"].data, probed.streams["event"].data)
    assert not np.array_equal(base.streams["tir"].data, probed.streams["tir"].data)


def test_one_fusion_block_mixes_modalities(rng):
    cfg = toy_config(fusion_blocks=(1,))
    model = build_tracker(cfg, seed=1)
    t, s, sentences = make_inputs(rng, cfg, batch=1)
    base = backbone_forward(model, embed(model, t, s, sentences))
    s2 = {m: v.copy() for m, v in s.items()}
    s2["tir"] -= 0.25
    probed = backbone_forward(model, embed(model, t, s2, sentences))
    assert not np.array_equal(base.streams["rgb"].data, probed.streams["rgb"].data)


def test_backbone_preserves_shapes(rng):
    cfg = toy_config()
    model = build_tracker(cfg, seed=0)
    t, s, sentences = make_inputs(rng, cfg, batch=3)
    tokens = embed(model, t, s, sentences)
    out = backbone_forward(model, tokens)
    for name, stream in out.streams.items():
        assert stream.shape == tokens.streams[name].shape


def test_merge_of_identical_streams_equals_single_stream(rng):
    cfg = toy_config(modalities=("rgb", "tir", "event"), fusion_blocks=())
    model = build_tracker(cfg, seed=0)
    shared_t = rng.uniform(-1, 1, (1, 32, 32, 3)).astype(np.float32)
    shared_s = rng.uniform(-1, 1, (1, 64, 64, 3)).astype(np.float32)
    t = {m: shared_t.copy() for m in ("rgb", "tir", "event")}
    s = {m: shared_s.copy() for m in ("rgb", "tir", "event")}
    tokens = backbone_forward(model, embed(model, t, s, None))
    head_multi, _ = merge_and_predict(model, tokens)

    cfg1 = toy_config(modalities=("rgb",), fusion_blocks=())
    model1 = build_tracker(cfg1, seed=0)
    tokens1 = backbone_forward(model1, embed(model1, {"rgb": shared_t}, {"rgb": shared_s}, None))
    head_single, _ = merge_and_predict(model1, tokens1)
    np.testing.assert_allclose(
        head_multi.cls_logits.data, head_single.cls_logits.data, atol=1e-5
    )


def test_decode_hand_case():
    heat = np.zeros((1, 64))
    heat[0, 2 * 8 + 3] = 1.0  # row 2, col 3 on the 8x8 grid
    offset = np.zeros((1, 64, 2))
    size = np.full((1, 64, 2), 0.25)
    boxes = decode_boxes(heat, offset, size, grid_side=8, search_px=64)
    x1, y1, w, h = boxes[0]
    assert (w, h) == (16.0, 16.0)
    assert (x1 + w / 2, y1 + h / 2) == (28.0, 20.0)


def test_uniform_heatmap_tie_breaks_lowest_index():
    heat = np.full((1, 64), 0.5)
    offset = np.zeros((1, 64, 2))
    size = np.full((1, 64, 2), 0.1)
    boxes = decode_boxes(heat, offset, size, grid_side=8, search_px=64)
    # argmax tie -> cell 0 -> center (4, 4)
    assert (boxes[0][0] + boxes[0][2] / 2, boxes[0][1] + boxes[0][3] / 2) == (4.0, 4.0)


def test_encode_decode_round_trip(rng):
    for _ in range(50):
        w = rng.uniform(4, 30)
        h = rng.uniform(4, 30)
        x1 = rng.uniform(0, 64 - w)
        y1 = rng.uniform(0, 64 - h)
        gt = np.array([[x1, y1, w, h]])
        heat, cells, offsets, sizes = encode_targets(gt, grid_side=8, search_px=64, radius=1.0)
        assert heat.max() == 1.0
        offset_map = np.zeros((1, 64, 2))
        size_map = np.zeros((1, 64, 2))
        offset_map[0, cells[0]] = offsets[0]
        size_map[0, cells[0]] = sizes[0]
        boxes = decode_boxes(heat, offset_map, size_map, grid_side=8, search_px=64)
        np.testing.assert_allclose(boxes[0], gt[0], atol=0.5)


def test_published_scale_forward_smoke(rng):
    # the 1280-token configuration: 4 streams x (64 template + 256 search)
    cfg = TrackerConfig(
        search_size=128, template_size=64, patch_size=8, embed_dim=16, depth=1,
        fusion_blocks=(0,), fusion_expand=1, state_dim=2, conv_width=2,
        head_hidden=8,
    )
    assert cfg.geometry.total_tokens == 1280
    model = build_tracker(cfg, seed=0)
    t = {m: rng.uniform(-1, 1, (1, 64, 64, 3)).astype(np.float32)
         for m in ("rgb", "tir", "event")}
    s = {m: rng.uniform(-1, 1, (1, 128, 128, 3)).astype(np.float32)
         for m in ("rgb", "tir", "event")}
    tokens = backbone_forward(model, embed(model, t, s, ["the red square moving left"]))
    head, boxes = merge_and_predict(model, tokens)
    assert head.cls_logits.shape == (1, 256)
    assert boxes.shape == (1, 4)


def test_set_fusion_paths_shares_weights(rng):
    cfg = toy_config()
    model = build_tracker(cfg, seed=0)
    narrowed = set_fusion_paths(model, ("forward", "backward"))
    assert narrowed.fusion[1].enabled == ("forward", "backward")
    assert narrowed.fusion[1].in_x_weight is model.fusion[1].in_x_weight
    assert narrowed.param_count() < model.param_count()
