"""Multi-scan fusion block: one gated selective-scan path per scanning scale.

The concatenated multi-modal sequence is projected once into a signal branch
and a gate branch. Each enabled path serializes the signal branch along its
scan order, runs a depthwise causal conv followed by the selective scan,
and de-serializes back to canonical layout. Path outputs are averaged,
gated with silu of the gate branch, projected back, and added residually:

    out = x + OutProj( mean_p( unapply_p( scan_p( conv_p( apply_p(x @ InX) )))) * silu(x @ InZ) )

Projections are shared across paths; each path owns its conv kernel and scan
parameters. Disabled paths contribute nothing and shrink the mean's divisor.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from quadscan.errors import ConfigError, ShapeError
from quadscan.numerics.tensor import Tensor, matmul, mul, silu
from quadscan.scanorders import (
    MODAL_BACKWARD,
    MODAL_FORWARD,
    REGION,
    TOKEN,
    TokenGeometry,
    all_orders,
    apply_order,
    unapply_order,
)
from quadscan.ssm import (
    SelectiveScanParams,
    causal_conv_flops,
    causal_depthwise_conv,
    init_selective_scan_params,
    selective_scan,
    selective_scan_flops,
)

# short path names used in configs / CLI flags, mapped to scan scales
PATH_NAMES = ("forward", "backward", "region", "token")
PATH_TO_SCALE = {
    "forward": MODAL_FORWARD,
    "backward": MODAL_BACKWARD,
    "region": REGION,
    "token": TOKEN,
}

# named ablation variants and the paths they enable
VARIANT_PATHS = {
    "baseline": (),
    "w_mamba": ("forward", "backward"),
    "v2": ("forward", "backward", "region"),
    "v3": ("forward", "backward", "token"),
    "full": PATH_NAMES,
}


@dataclass
class FusionBlock:
    """Shared in/out projections plus per-path conv + scan parameters."""

    channels: int
    inner: int
    in_x_weight: Tensor  # (C, inner) signal branch
    in_z_weight: Tensor  # (C, inner) gate branch
    out_weight: Tensor   # (inner, C)
    paths: dict[str, SelectiveScanParams]
    enabled: tuple[str, ...]

    def tensors(self, prefix: str = "fusion") -> dict[str, Tensor]:
        out = {
            f"{prefix}.in_x_weight": self.in_x_weight,
            f"{prefix}.in_z_weight": self.in_z_weight,
            f"{prefix}.out_weight": self.out_weight,
        }
        for name in PATH_NAMES:
            out.update(self.paths[name].tensors(f"{prefix}.{name}"))
        return out


def _validate_paths(enabled) -> tuple[str, ...]:
    enabled = tuple(enabled)
    unknown = [p for p in enabled if p not in PATH_NAMES]
    if unknown:
        raise ConfigError(f"unknown fusion paths {unknown}; valid: {list(PATH_NAMES)}")
    if not enabled:
        raise ConfigError("at least one fusion path must be enabled")
    # canonical order, duplicates dropped
    return tuple(p for p in PATH_NAMES if p in enabled)


def init_fusion_block(
    rng: np.random.Generator,
    channels: int,
    expand: int = 2,
    state_dim: int = 8,
    conv_width: int = 4,
    enabled=PATH_NAMES,
    dtype=np.float32,
) -> FusionBlock:
    inner = expand * channels
    scale = channels ** -0.5
    inner_scale = inner ** -0.5
    block = FusionBlock(
        channels=channels,
        inner=inner,
        in_x_weight=Tensor((rng.standard_normal((channels, inner)) * scale).astype(dtype),
                           requires_grad=True),
        in_z_weight=Tensor((rng.standard_normal((channels, inner)) * scale).astype(dtype),
                           requires_grad=True),
        out_weight=Tensor((rng.standard_normal((inner, channels)) * inner_scale).astype(dtype),
                          requires_grad=True),
        paths={
            name: init_selective_scan_params(rng, inner, state_dim, conv_width, dtype=dtype)
            for name in PATH_NAMES
        },
        enabled=_validate_paths(enabled),
    )
    return block


def with_paths(block: FusionBlock, enabled) -> FusionBlock:
    """Same weights, different enabled-path subset."""
    return replace(block, enabled=_validate_paths(enabled))


def variant(block: FusionBlock, name: str) -> FusionBlock:
    """Named ablation variants (two-path, +region, +token, all four)."""
    if name not in VARIANT_PATHS or name == "baseline":
        valid = [k for k in VARIANT_PATHS if k != "baseline"]
        raise ConfigError(f"unknown fusion variant '{name}'; valid: {valid}")
    return with_paths(block, VARIANT_PATHS[name])


def fusion_forward(tokens, geo: TokenGeometry, block: FusionBlock,
                   orders: dict[str, "object"] | None = None) -> Tensor:
    """Apply the block to the canonical concatenated sequence (..., M*N, C).

    ``orders`` lets callers reuse precomputed scan orders; by default the
    four canonical orders are built from the geometry.
    """
    tokens = tokens if isinstance(tokens, Tensor) else Tensor(tokens)
    if tokens.shape[-2] != geo.total_tokens:
        raise ShapeError(
            f"sequence rows {tokens.shape[-2]} != geometry total {geo.total_tokens}"
        )
    if tokens.shape[-1] != block.channels:
        raise ShapeError(f"channels {tokens.shape[-1]} != block channels {block.channels}")
    if orders is None:
        orders = all_orders(geo)
    signal = matmul(tokens, block.in_x_weight)
    gate = silu(matmul(tokens, block.in_z_weight))
    merged = None
    for name in block.enabled:
        params = block.paths[name]
        order = orders[PATH_TO_SCALE[name]]
        path_in = apply_order(order, signal)
        conved = causal_depthwise_conv(path_in, params.conv_kernel)
        scanned, _ = selective_scan(conved, params)
        restored = unapply_order(order, scanned)
        merged = restored if merged is None else merged + restored
    merged = merged * (1.0 / len(block.enabled))
    return tokens + matmul(mul(merged, gate), block.out_weight)


def count_flops(block: FusionBlock, geo: TokenGeometry) -> int:
    """Analytic multiply count for one forward pass.

    Convention: matmuls count m*k*n, elementwise products one per element,
    exp/softplus/sigmoid one per element; additions are free. The total is
    affine in the fused sequence length for fixed channel sizes.
    """
    length = geo.total_tokens
    c, inner = block.channels, block.inner
    total = 2 * length * c * inner          # in_x, in_z projections
    total += 2 * length * inner             # silu on the gate branch
    for name in block.enabled:
        params = block.paths[name]
        width = params.conv_kernel.shape[0]
        total += causal_conv_flops(length, inner, width)
        total += selective_scan_flops(length, inner, params.state_dim)
    total += length * inner                 # mean over paths (scale)
    total += length * inner                 # gating product
    total += length * inner * c             # output projection
    return total


def param_count(block: FusionBlock, enabled_only: bool = True) -> int:
    """Number of scalar parameters; by default counts only enabled paths."""
    total = block.in_x_weight.size + block.in_z_weight.size + block.out_weight.size
    names = block.enabled if enabled_only else PATH_NAMES
    for name in names:
        total += sum(t.size for t in block.paths[name].tensors("p").values())
    return total
