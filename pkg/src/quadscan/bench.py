"""Fusion-cost benchmark: the multi-scan block versus joint-attention fusion.

Baselines (forward only, they exist to be costed rather than trained):
  attention-A  three pairwise blocks, each jointly attending over the RGB
               stream concatenated with one other modality (2N tokens each)
  attention-B  one block attending over all four streams at once (4N tokens)

FLOP counts are analytic multiply counts matching the fusion block's
convention; wall times are medians over repeated forward passes.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass

import numpy as np

from quadscan.errors import ConfigError, GeometryError
from quadscan.fusion import count_flops, fusion_forward, init_fusion_block
from quadscan.numerics.tensor import Tensor
from quadscan.scanorders import (
    MODAL_BACKWARD,
    MODAL_FORWARD,
    REGION,
    TOKEN,
    ScanOrder,
    TokenGeometry,
    all_orders,
    backward_order,
    forward_order,
    token_order,
)


def attention_block_flops(tokens: int, dim: int) -> int:
    """Multiplies in one pre-norm attention+MLP block over ``tokens`` rows."""
    qkv = 3 * tokens * dim * dim
    scores = tokens * tokens * dim
    weighted = tokens * tokens * dim
    proj = tokens * dim * dim
    mlp = 2 * tokens * dim * (4 * dim)
    return qkv + scores + weighted + proj + mlp


def attention_a_flops(n_per_modality: int, dim: int) -> int:
    return 3 * attention_block_flops(2 * n_per_modality, dim)


def attention_b_flops(n_per_modality: int, dim: int, modalities: int = 4) -> int:
    return attention_block_flops(modalities * n_per_modality, dim)


@dataclass
class _AttentionWeights:
    qkv: np.ndarray
    proj: np.ndarray
    w1: np.ndarray
    w2: np.ndarray

    @classmethod
    def init(cls, rng: np.random.Generator, dim: int) -> "_AttentionWeights":
        s = dim ** -0.5
        return cls(
            qkv=(rng.standard_normal((dim, 3 * dim)) * s).astype(np.float32),
            proj=(rng.standard_normal((dim, dim)) * s).astype(np.float32),
            w1=(rng.standard_normal((dim, 4 * dim)) * s).astype(np.float32),
            w2=(rng.standard_normal((4 * dim, dim)) * (4 * dim) ** -0.5).astype(np.float32),
        )


def _attention_forward(x: np.ndarray, w: _AttentionWeights) -> np.ndarray:
    dim = x.shape[-1]
    qkv = x @ w.qkv
    q, k, v = qkv[:, :dim], qkv[:, dim:2 * dim], qkv[:, 2 * dim:]
    scores = (q @ k.T) / dim ** 0.5
    scores -= scores.max(axis=-1, keepdims=True)
    e = np.exp(scores)
    attn = e / e.sum(axis=-1, keepdims=True)
    x = x + (attn @ v) @ w.proj
    hidden = x @ w.w1
    hidden *= 0.5 * (np.tanh(0.5 * hidden) + 1.0)
    return x + hidden @ w.w2


def _timing_orders(geo: TokenGeometry):
    """Scan orders for timing runs.

    Lengths whose template grid is not square have no region decomposition;
    a reversed token order stands in for it there. Permutation gathers cost
    the same regardless of visit pattern, so the measured wall time still
    reflects a full four-path block.
    """
    try:
        return all_orders(geo)
    except GeometryError:
        orders = {
            scale: build(geo)
            for scale, build in (
                (MODAL_FORWARD, forward_order),
                (MODAL_BACKWARD, backward_order),
                (TOKEN, token_order),
            )
        }
        orders[REGION] = ScanOrder(REGION, orders[TOKEN].perm[::-1].copy())
        return orders


def median_time(fn, warmups: int = 2, repeats: int = 5) -> float:
    """Median wall-clock seconds over ``repeats`` runs after warmups."""
    for _ in range(warmups):
        fn()
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return float(np.median(samples))


@dataclass
class BenchRow:
    n_per_modality: int
    total_tokens: int
    mfm_flops: int
    attn_a_flops: int
    attn_b_flops: int
    mfm_seconds: float
    attn_a_seconds: float
    attn_b_seconds: float


def bench_fusion(
    lengths: list[int],
    dim: int = 32,
    modalities: int = 4,
    state_dim: int = 8,
    conv_width: int = 4,
    expand: int = 2,
    seed: int = 0,
    warmups: int = 2,
    repeats: int = 5,
) -> list[BenchRow]:
    """Cost one fusion block and both attention baselines per token length.

    ``lengths`` are per-modality token counts; each must decompose into a
    template plus four template-sized search regions (n = 5 * square).
    """
    rng = np.random.default_rng(seed)
    block = init_fusion_block(
        rng, dim, expand=expand, state_dim=state_dim, conv_width=conv_width,
        dtype=np.float32,
    )
    attn = _AttentionWeights.init(rng, dim)
    rows = []
    for n in lengths:
        if n % 5:
            raise ConfigError(f"per-modality length {n} is not template + 4 regions")
        geo = TokenGeometry(modalities, n // 5, 4 * (n // 5))
        orders = _timing_orders(geo)
        total = geo.total_tokens
        fused_in = Tensor(rng.standard_normal((total, dim)).astype(np.float32))
        pair_in = rng.standard_normal((2 * n, dim)).astype(np.float32)
        joint_in = rng.standard_normal((modalities * n, dim)).astype(np.float32)

        def run_fusion():
            fusion_forward(fused_in, geo, block, orders=orders)

        def run_a():
            for _ in range(3):
                _attention_forward(pair_in, attn)

        def run_b():
            _attention_forward(joint_in, attn)

        rows.append(BenchRow(
            n_per_modality=n,
            total_tokens=total,
            mfm_flops=count_flops(block, geo),
            attn_a_flops=attention_a_flops(n, dim),
            attn_b_flops=attention_b_flops(n, dim, modalities),
            mfm_seconds=median_time(run_fusion, warmups, repeats),
            attn_a_seconds=median_time(run_a, warmups, repeats),
            attn_b_seconds=median_time(run_b, warmups, repeats),
        ))
    return rows


def bench_csv_text(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([
        "n_per_modality", "total_tokens", "mfm_flops", "attn_a_flops",
        "attn_b_flops", "mfm_seconds", "attn_a_seconds", "attn_b_seconds",
    ])
    for r in rows:
        writer.writerow([
            r.n_per_modality, r.total_tokens, r.mfm_flops, r.attn_a_flops,
            r.attn_b_flops, repr(r.mfm_seconds), repr(r.attn_a_seconds),
            repr(r.attn_b_seconds),
        ])
    return buf.getvalue()


def affine_fit_r2(x: np.ndarray, y: np.ndarray) -> float:
    """R^2 of the least-squares affine fit y ~ a + b x."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    coeffs = np.polyfit(x, y, 1)
    pred = np.polyval(coeffs, x)
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return 1.0
    return 1.0 - ss_res / ss_tot
