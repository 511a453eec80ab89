"""One-stream tracking pipeline on quad-modal token streams.

Per modality the stream is [template tokens; search tokens]; the three visual
modalities share one patch embedding, and the language stream replicates a
single sentence embedding into the template slots while its search half starts
as a copy of the RGB search tokens. Streams pass independently through
shared-weight attention blocks (intra-stream only); cross-modal exchange
happens exclusively inside the fusion blocks inserted after configured block
indices. Search halves are averaged across streams and decoded by a
center-style head (heatmap + offset + size).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from quadscan.errors import ConfigError, InputError, ShapeError
from quadscan.fusion import (
    PATH_NAMES,
    FusionBlock,
    fusion_forward,
    init_fusion_block,
    with_paths,
)
from quadscan.numerics.checkpoint import load_checkpoint
from quadscan.numerics.tensor import (
    Tensor,
    broadcast_rows,
    concat,
    embed_rows,
    layernorm,
    matmul,
    mean_,
    reshape,
    sigmoid,
    silu,
    slice_along,
    softmax,
    sub,
    swap_last,
)
from quadscan.scanorders import TokenGeometry

MODALITY_ORDER = ("rgb", "tir", "event", "lang")

VOCAB = (
    "<unk>", "the", "a", "square", "box", "block", "moving", "standing",
    "still", "left", "right", "up", "down", "red", "green", "blue",
    "yellow", "magenta", "cyan", "orange", "white", "gray",
)
_WORD_TO_ID = {w: i for i, w in enumerate(VOCAB)}


def sentence_to_ids(sentence: str) -> np.ndarray:
    words = sentence.lower().replace(",", " ").replace(".", " ").split()
    if not words:
        words = ["<unk>"]
    return np.array([_WORD_TO_ID.get(w, 0) for w in words], dtype=np.int64)


@dataclass(frozen=True)
class TrackerConfig:
    search_size: int = 64
    template_size: int = 32
    patch_size: int = 8
    embed_dim: int = 32
    depth: int = 2
    mlp_ratio: int = 2
    modalities: tuple[str, ...] = MODALITY_ORDER
    fusion_blocks: tuple[int, ...] = (1,)
    fusion_paths: tuple[str, ...] = PATH_NAMES
    fusion_expand: int = 2
    state_dim: int = 8
    conv_width: int = 4
    head_hidden: int = 32
    iou_weight: float = 2.0
    l1_weight: float = 5.0
    context_factor: float = 2.0
    search_factor: float = 2.0
    dtype: str = "float32"

    def __post_init__(self):
        if self.search_size != 2 * self.template_size:
            raise ConfigError("template crop must be half the search crop side")
        if self.search_size % self.patch_size or self.template_size % self.patch_size:
            raise ConfigError("crop sizes must be multiples of the patch size")
        unknown = [m for m in self.modalities if m not in MODALITY_ORDER]
        if unknown:
            raise ConfigError(f"unknown modalities {unknown}; valid: {list(MODALITY_ORDER)}")
        if "lang" in self.modalities and "rgb" not in self.modalities:
            raise ConfigError("the language stream borrows RGB search tokens; enable rgb")
        if not self.modalities:
            raise ConfigError("at least one modality required")
        ordered = tuple(m for m in MODALITY_ORDER if m in self.modalities)
        object.__setattr__(self, "modalities", ordered)
        if self.depth < 1:
            raise ConfigError("depth must be >= 1")
        bad = [i for i in self.fusion_blocks if not 0 <= i < self.depth]
        if bad:
            raise ConfigError(f"fusion block indices {bad} outside depth {self.depth}")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    @property
    def template_grid(self) -> int:
        return self.template_size // self.patch_size

    @property
    def search_grid(self) -> int:
        return self.search_size // self.patch_size

    @property
    def template_tokens(self) -> int:
        return self.template_grid ** 2

    @property
    def search_tokens(self) -> int:
        return self.search_grid ** 2

    @property
    def tokens_per_stream(self) -> int:
        return self.template_tokens + self.search_tokens

    @property
    def geometry(self) -> TokenGeometry:
        return TokenGeometry(len(self.modalities), self.template_tokens, self.search_tokens)


@dataclass
class ModalTokenSet:
    """Per-modality token streams (B, N, C) in canonical modality order."""

    streams: dict[str, Tensor]
    template_tokens: int
    search_tokens: int

    @property
    def geometry(self) -> TokenGeometry:
        return TokenGeometry(len(self.streams), self.template_tokens, self.search_tokens)


@dataclass
class HeadOutput:
    """Dense head maps over the search grid (row-major cells)."""

    cls_logits: Tensor   # (B, n_search)
    heatmap: Tensor      # (B, n_search) in [0, 1]
    offset: Tensor       # (B, n_search, 2) in (-1, 1), x then y, cell units;
                         # targets live in [-0.5, 0.5] so cell-boundary
                         # phases stay clear of the activation's saturation
    size: Tensor         # (B, n_search, 2) in (0, 1), fraction of search side
    grid_side: int
    search_px: int


class TrackerModel:
    def __init__(self, config: TrackerConfig, params: dict[str, Tensor],
                 fusion: dict[int, FusionBlock]):
        self.config = config
        self.params = params
        self.fusion = fusion

    def tensors(self) -> dict[str, Tensor]:
        """Trainable tensors: backbone/head params plus enabled fusion paths.

        The word table is always allocated (keeping init draws comparable
        across modality subsets) but participates only when the language
        stream is active.
        """
        out = dict(self.params)
        if "lang" not in self.config.modalities:
            out.pop("word_embed", None)
        for index, block in self.fusion.items():
            prefix = f"fusion{index}"
            out[f"{prefix}.in_x_weight"] = block.in_x_weight
            out[f"{prefix}.in_z_weight"] = block.in_z_weight
            out[f"{prefix}.out_weight"] = block.out_weight
            for name in block.enabled:
                out.update(block.paths[name].tensors(f"{prefix}.{name}"))
        return out

    def param_count(self) -> int:
        return sum(t.size for t in self.tensors().values())


def _normal(rng, shape, scale, dtype) -> Tensor:
    return Tensor((rng.standard_normal(shape) * scale).astype(dtype), requires_grad=True)


def _zeros(shape, dtype) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


def _ones(shape, dtype) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=True)


def _const(shape, value, dtype) -> Tensor:
    return Tensor(np.full(shape, value, dtype=dtype), requires_grad=True)


def build_tracker(config: TrackerConfig, seed: int) -> TrackerModel:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 1]))
    dt = config.np_dtype
    c = config.embed_dim
    patch_dim = config.patch_size * config.patch_size * 3
    hidden = config.mlp_ratio * c
    head_h = config.head_hidden

    params: dict[str, Tensor] = {
        "patch_weight": _normal(rng, (patch_dim, c), patch_dim ** -0.5, dt),
        "patch_bias": _zeros((c,), dt),
        "pos_template": _normal(rng, (config.template_tokens, c), 0.02, dt),
        "pos_search": _normal(rng, (config.search_tokens, c), 0.02, dt),
        "word_embed": _normal(rng, (len(VOCAB), c), 0.02, dt),
    }
    for i in range(config.depth):
        p = f"block{i}"
        params[f"{p}.ln1.gain"] = _ones((c,), dt)
        params[f"{p}.ln1.bias"] = _zeros((c,), dt)
        params[f"{p}.qkv_weight"] = _normal(rng, (c, 3 * c), c ** -0.5, dt)
        params[f"{p}.qkv_bias"] = _zeros((3 * c,), dt)
        params[f"{p}.attn_out_weight"] = _normal(rng, (c, c), c ** -0.5 / (2 * config.depth) ** 0.5, dt)
        params[f"{p}.attn_out_bias"] = _zeros((c,), dt)
        params[f"{p}.ln2.gain"] = _ones((c,), dt)
        params[f"{p}.ln2.bias"] = _zeros((c,), dt)
        params[f"{p}.mlp_w1"] = _normal(rng, (c, hidden), c ** -0.5, dt)
        params[f"{p}.mlp_b1"] = _zeros((hidden,), dt)
        params[f"{p}.mlp_w2"] = _normal(rng, (hidden, c), hidden ** -0.5 / (2 * config.depth) ** 0.5, dt)
        params[f"{p}.mlp_b2"] = _zeros((c,), dt)
    params["head.ln.gain"] = _ones((c,), dt)
    params["head.ln.bias"] = _zeros((c,), dt)
    for branch, width, bias_init in (
        ("cls", 1, float(np.log(0.01 / 0.99))),   # start heatmap near 0.01
        ("off", 2, 0.0),                          # start offsets at cell centers
        ("size", 2, float(np.log(0.25 / 0.75))),  # start sizes at a quarter of the crop
    ):
        params[f"head.{branch}_w1"] = _normal(rng, (c, head_h), c ** -0.5, dt)
        params[f"head.{branch}_b1"] = _zeros((head_h,), dt)
        params[f"head.{branch}_w2"] = _zeros((head_h, width), dt)
        params[f"head.{branch}_b2"] = _const((width,), bias_init, dt)

    fusion = {
        i: init_fusion_block(
            rng, c,
            expand=config.fusion_expand,
            state_dim=config.state_dim,
            conv_width=config.conv_width,
            enabled=config.fusion_paths,
            dtype=dt,
        )
        for i in config.fusion_blocks
    }
    return TrackerModel(config, params, fusion)


def set_fusion_paths(model: TrackerModel, paths) -> TrackerModel:
    fusion = {i: with_paths(b, paths) for i, b in model.fusion.items()}
    cfg = replace(model.config, fusion_paths=tuple(paths))
    return TrackerModel(cfg, model.params, fusion)


def patchify(images: np.ndarray, patch: int) -> np.ndarray:
    """(B, H, W, 3) -> (B, (H/patch)*(W/patch), patch*patch*3), raster order."""
    b, h, w, ch = images.shape
    if h % patch or w % patch:
        raise InputError(f"image side {h}x{w} not a multiple of patch {patch}")
    gh, gw = h // patch, w // patch
    out = images.reshape(b, gh, patch, gw, patch, ch)
    out = out.transpose(0, 1, 3, 2, 4, 5)
    return np.ascontiguousarray(out).reshape(b, gh * gw, patch * patch * ch)


def embed(model: TrackerModel, templates: dict[str, np.ndarray],
          searches: dict[str, np.ndarray], sentences: list[str] | None) -> ModalTokenSet:
    """Build the per-modality token streams for a batch of crops.

    ``templates[mod]`` is (B, T, T, 3) and ``searches[mod]`` is (B, S, S, 3)
    float arrays, already normalized; the language stream needs ``sentences``.
    """
    cfg = model.config
    visual = [m for m in cfg.modalities if m != "lang"]
    shapes_t = {templates[m].shape for m in visual}
    shapes_s = {searches[m].shape for m in visual}
    if len(shapes_t) > 1 or len(shapes_s) > 1:
        raise InputError(f"visual modalities disagree on resolution: {shapes_t} / {shapes_s}")
    sample = templates[visual[0]]
    if sample.shape[1] != cfg.template_size or searches[visual[0]].shape[1] != cfg.search_size:
        raise InputError(
            f"crop sizes {sample.shape[1]}/{searches[visual[0]].shape[1]} do not match "
            f"config {cfg.template_size}/{cfg.search_size}"
        )
    dt = cfg.np_dtype
    w, bias = model.params["patch_weight"], model.params["patch_bias"]
    pos_t, pos_s = model.params["pos_template"], model.params["pos_search"]

    streams: dict[str, Tensor] = {}
    for m in visual:
        t_tok = matmul(Tensor(patchify(templates[m].astype(dt), cfg.patch_size)), w) + bias + pos_t
        s_tok = matmul(Tensor(patchify(searches[m].astype(dt), cfg.patch_size)), w) + bias + pos_s
        streams[m] = concat([t_tok, s_tok], axis=-2)

    if "lang" in cfg.modalities:
        if sentences is None:
            raise InputError("language modality enabled but no sentences given")
        batch = sample.shape[0]
        if len(sentences) != batch:
            raise InputError(f"{len(sentences)} sentences for batch of {batch}")
        rows = []
        for sentence in sentences:
            ids = sentence_to_ids(sentence)
            vec = mean_(embed_rows(model.params["word_embed"], ids), axis=0, keepdims=True)
            rows.append(reshape(vec, (1, 1, cfg.embed_dim)))
        lang_vec = concat(rows, axis=0)                      # (B, 1, C)
        z_lang = broadcast_rows(lang_vec, cfg.template_tokens) + pos_t
        rgb_search = slice_along(streams["rgb"], -2, cfg.template_tokens, cfg.tokens_per_stream)
        streams["lang"] = concat([z_lang, rgb_search], axis=-2)

    ordered = {m: streams[m] for m in cfg.modalities}
    return ModalTokenSet(ordered, cfg.template_tokens, cfg.search_tokens)


def _attention_block(model: TrackerModel, x: Tensor, index: int) -> Tensor:
    cfg = model.config
    p = model.params
    c = cfg.embed_dim
    pre = f"block{index}"
    h = layernorm(x, p[f"{pre}.ln1.gain"], p[f"{pre}.ln1.bias"])
    qkv = matmul(h, p[f"{pre}.qkv_weight"]) + p[f"{pre}.qkv_bias"]
    q = slice_along(qkv, -1, 0, c)
    k = slice_along(qkv, -1, c, 2 * c)
    v = slice_along(qkv, -1, 2 * c, 3 * c)
    scores = matmul(q, swap_last(k)) * (1.0 / c ** 0.5)
    attn = softmax(scores)
    x = x + (matmul(matmul(attn, v), p[f"{pre}.attn_out_weight"]) + p[f"{pre}.attn_out_bias"])
    m = layernorm(x, p[f"{pre}.ln2.gain"], p[f"{pre}.ln2.bias"])
    x = x + (matmul(silu(matmul(m, p[f"{pre}.mlp_w1"]) + p[f"{pre}.mlp_b1"]),
                    p[f"{pre}.mlp_w2"]) + p[f"{pre}.mlp_b2"])
    return x


def backbone_forward(model: TrackerModel, tokens: ModalTokenSet) -> ModalTokenSet:
    """Shared attention blocks per stream, fusion after configured indices."""
    cfg = model.config
    names = list(tokens.streams)
    n = tokens.template_tokens + tokens.search_tokens
    stacked = concat(list(tokens.streams.values()), axis=0)  # (M*B, N, C)
    batch = tokens.streams[names[0]].shape[0]
    geo = tokens.geometry
    for i in range(cfg.depth):
        stacked = _attention_block(model, stacked, i)
        if i in model.fusion:
            per_stream = [
                slice_along(stacked, 0, j * batch, (j + 1) * batch) for j in range(len(names))
            ]
            fused_seq = concat(per_stream, axis=-2)          # (B, M*N, C)
            fused_seq = fusion_forward(fused_seq, geo, model.fusion[i])
            back = [
                slice_along(fused_seq, -2, j * n, (j + 1) * n) for j in range(len(names))
            ]
            stacked = concat(back, axis=0)
    split = {
        name: slice_along(stacked, 0, j * batch, (j + 1) * batch)
        for j, name in enumerate(names)
    }
    return ModalTokenSet(split, tokens.template_tokens, tokens.search_tokens)


def merge_and_predict(model: TrackerModel, tokens: ModalTokenSet) -> tuple[HeadOutput, np.ndarray]:
    """Average search halves across streams, run the head, decode boxes.

    Returns the head maps plus decoded [x1, y1, w, h] boxes in search-crop
    pixels (one per batch item), with argmax ties broken at the lowest
    row-major cell.
    """
    cfg = model.config
    n = tokens.template_tokens + tokens.search_tokens
    parts = [
        slice_along(stream, -2, tokens.template_tokens, n)
        for stream in tokens.streams.values()
    ]
    merged = parts[0]
    for part in parts[1:]:
        merged = merged + part
    merged = merged * (1.0 / len(parts))
    p = model.params
    h = layernorm(merged, p["head.ln.gain"], p["head.ln.bias"])

    def branch(name: str) -> Tensor:
        hid = silu(matmul(h, p[f"head.{name}_w1"]) + p[f"head.{name}_b1"])
        return matmul(hid, p[f"head.{name}_w2"]) + p[f"head.{name}_b2"]

    batch = merged.shape[0]
    logits = reshape(branch("cls"), (batch, cfg.search_tokens))
    head = HeadOutput(
        cls_logits=logits,
        heatmap=sigmoid(logits),
        offset=sub(sigmoid(branch("off")), 0.5) * 2.0,
        size=sigmoid(branch("size")),
        grid_side=cfg.search_grid,
        search_px=cfg.search_size,
    )
    boxes = decode_boxes(
        head.heatmap.data, head.offset.data, head.size.data,
        head.grid_side, head.search_px,
    )
    return head, boxes


def decode_boxes(heatmap: np.ndarray, offset: np.ndarray, size: np.ndarray,
                 grid_side: int, search_px: float) -> np.ndarray:
    """Decode [x1, y1, w, h] in crop pixels from dense head maps."""
    batch = heatmap.shape[0]
    idx = heatmap.reshape(batch, -1).argmax(axis=1)
    rows_sel = np.arange(batch)
    col = (idx % grid_side).astype(np.float64)
    row = (idx // grid_side).astype(np.float64)
    stride = search_px / grid_side
    off = offset[rows_sel, idx].astype(np.float64)
    sz = size[rows_sel, idx].astype(np.float64)
    cx = (col + 0.5 + off[:, 0]) * stride
    cy = (row + 0.5 + off[:, 1]) * stride
    w = sz[:, 0] * search_px
    h = sz[:, 1] * search_px
    return np.stack([cx - w / 2, cy - h / 2, w, h], axis=1)


def gaussian_radius(cfg: TrackerConfig) -> float:
    return max(1.0, cfg.template_grid / 4.0)


def encode_targets(gt_boxes: np.ndarray, grid_side: int, search_px: float,
                   radius: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Targets for a batch of [x1, y1, w, h] boxes in crop pixels.

    Returns (heatmap (B, side*side) with an exact 1 at the peak cell,
    peak cell indices (B,), offset targets (B, 2), size targets (B, 2)).
    """
    gt = np.asarray(gt_boxes, dtype=np.float64)
    batch = gt.shape[0]
    stride = search_px / grid_side
    cx = gt[:, 0] + gt[:, 2] / 2
    cy = gt[:, 1] + gt[:, 3] / 2
    col = np.clip(np.floor(cx / stride), 0, grid_side - 1).astype(np.int64)
    row = np.clip(np.floor(cy / stride), 0, grid_side - 1).astype(np.int64)
    cells = row * grid_side + col
    offsets = np.stack([cx / stride - (col + 0.5), cy / stride - (row + 0.5)], axis=1)
    sizes = np.stack([gt[:, 2] / search_px, gt[:, 3] / search_px], axis=1)
    sigma = radius / 3.0
    grid = np.arange(grid_side)
    gc, gr = np.meshgrid(grid, grid)  # gc varies along columns
    d2 = (gc[None] - col[:, None, None]) ** 2 + (gr[None] - row[:, None, None]) ** 2
    heat = np.exp(-d2 / (2.0 * sigma * sigma)).reshape(batch, -1)
    return heat, cells, offsets, sizes


def load_tracker(config: TrackerConfig, checkpoint_path) -> TrackerModel:
    """Rebuild a model and load checkpoint weights by name (exact match)."""
    model = build_tracker(config, seed=0)
    stored = load_checkpoint(checkpoint_path)
    tensors = model.tensors()
    missing = sorted(set(tensors) - set(stored))
    extra = sorted(set(stored) - set(tensors))
    if missing or extra:
        raise ShapeError(
            f"checkpoint does not match config (missing {missing[:3]}, extra {extra[:3]})"
        )
    for name, tensor in tensors.items():
        arr = stored[name].astype(config.np_dtype)
        if arr.shape != tensor.shape:
            raise ShapeError(f"checkpoint shape {arr.shape} != model shape {tensor.shape} for {name}")
        tensor.data[...] = arr
    return model
