"""Minimal dense-tensor arithmetic with reverse-mode differentiation."""

from quadscan.numerics.checkpoint import MAGIC, VERSION, load_checkpoint, save_checkpoint
from quadscan.numerics.gradcheck import check_gradients, finite_difference, relative_error
from quadscan.numerics.optim import AdamW, adamw_step
from quadscan.numerics.tensor import (
    Tape,
    Tensor,
    abs_,
    active_tape,
    add,
    as_tensor,
    broadcast_rows,
    concat,
    div,
    embed_rows,
    exp,
    layernorm,
    matmul,
    mean_,
    mul,
    neg,
    normalized,
    permute_rows,
    pick_cells,
    relu,
    reshape,
    sigmoid,
    silu,
    slice_along,
    softmax,
    softplus,
    sub,
    sum_,
    swap_last,
    transpose_axes,
)

__all__ = [
    "AdamW",
    "MAGIC",
    "Tape",
    "Tensor",
    "VERSION",
    "abs_",
    "active_tape",
    "adamw_step",
    "add",
    "as_tensor",
    "broadcast_rows",
    "check_gradients",
    "concat",
    "div",
    "embed_rows",
    "exp",
    "finite_difference",
    "layernorm",
    "load_checkpoint",
    "matmul",
    "mean_",
    "mul",
    "neg",
    "normalized",
    "permute_rows",
    "pick_cells",
    "relative_error",
    "relu",
    "reshape",
    "save_checkpoint",
    "sigmoid",
    "silu",
    "slice_along",
    "softmax",
    "softplus",
    "sub",
    "sum_",
    "swap_last",
    "transpose_axes",
]
