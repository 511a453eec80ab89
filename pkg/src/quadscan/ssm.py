"""Selective state-space scan kernel with analytic gradients.

Per channel c and state dim s, with input row x_t:

    delta_t = softplus(x_t @ dt_weight + dt_bias)        (per channel)
    decay_t = exp(delta_t * A)          A = -exp(a_log)  (strictly negative)
    h_t     = decay_t * h_{t-1} + delta_t * (x_t @ b_weight) * x_t
    y_t     = <x_t @ c_weight, h_t> + skip * x_t

Zero-order hold on A with the Euler-simplified input path. Cost is linear in
sequence length; the recurrence is strictly sequential within one sequence
while callers may batch independent sequences along a leading axis.

The depthwise causal convolution (kernel stored alongside the scan params) is
applied by callers before the scan, never inside it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from quadscan.errors import ContractError, NumericError, ShapeError
from quadscan.numerics.tensor import Tensor, _record, _sigmoid_data, as_tensor


@dataclass
class SelectiveScanParams:
    """Parameters for one scan path. All arrays are (channels, ...) shaped."""

    channels: int
    state_dim: int
    a_log: Tensor        # (C, S); continuous-time decay is -exp(a_log)
    skip: Tensor         # (C,) direct input gain
    dt_weight: Tensor    # (C, C) step-size projection
    dt_bias: Tensor      # (C,)
    b_weight: Tensor     # (C, S) input -> state injection
    c_weight: Tensor     # (C, S) state -> output readout
    conv_kernel: Tensor  # (width, C) depthwise causal kernel

    def tensors(self, prefix: str) -> dict[str, Tensor]:
        return {
            f"{prefix}.a_log": self.a_log,
            f"{prefix}.skip": self.skip,
            f"{prefix}.dt_weight": self.dt_weight,
            f"{prefix}.dt_bias": self.dt_bias,
            f"{prefix}.b_weight": self.b_weight,
            f"{prefix}.c_weight": self.c_weight,
            f"{prefix}.conv_kernel": self.conv_kernel,
        }


def _softplus_inverse(y: np.ndarray) -> np.ndarray:
    return np.log(np.expm1(y))


def init_selective_scan_params(
    rng: np.random.Generator,
    channels: int,
    state_dim: int = 8,
    conv_width: int = 4,
    dtype=np.float32,
) -> SelectiveScanParams:
    """Conventional initialization: states span timescales 1..state_dim and the
    softplus'd step size starts roughly log-uniform in [1e-3, 1e-1]."""
    a_log = np.log(np.tile(np.arange(1, state_dim + 1, dtype=np.float64), (channels, 1)))
    dt = np.exp(rng.uniform(np.log(1e-3), np.log(1e-1), size=channels))
    scale = channels ** -0.5
    params = SelectiveScanParams(
        channels=channels,
        state_dim=state_dim,
        a_log=Tensor(a_log.astype(dtype), requires_grad=True),
        skip=Tensor(np.ones(channels, dtype=dtype), requires_grad=True),
        dt_weight=Tensor((rng.standard_normal((channels, channels)) * scale * 0.1).astype(dtype),
                         requires_grad=True),
        dt_bias=Tensor(_softplus_inverse(dt).astype(dtype), requires_grad=True),
        b_weight=Tensor((rng.standard_normal((channels, state_dim)) * scale).astype(dtype),
                        requires_grad=True),
        c_weight=Tensor((rng.standard_normal((channels, state_dim)) * scale).astype(dtype),
                        requires_grad=True),
        conv_kernel=Tensor(rng.uniform(-1, 1, size=(conv_width, channels)).astype(dtype)
                           * conv_width ** -0.5, requires_grad=True),
    )
    return params


# ---------------------------------------------------------------------------
# depthwise causal convolution
# ---------------------------------------------------------------------------


def causal_depthwise_conv(x, kernel) -> Tensor:
    """y_t = sum_j kernel[j] * x_{t-j}, zero-padded on the left.

    ``x`` is (..., L, C), ``kernel`` is (width, C). kernel=[1] is the identity
    and kernel=[0, 1] delays the sequence by one step.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if x.ndim < 2 or kernel.ndim != 2:
        raise ShapeError(f"conv expects (..., L, C) and (width, C), got {x.shape}, {kernel.shape}")
    if kernel.shape[1] != x.shape[-1]:
        raise ShapeError(f"kernel channels {kernel.shape[1]} != input channels {x.shape[-1]}")
    width = kernel.shape[0]
    if width < 1:
        raise ShapeError("kernel width must be >= 1")
    xd, kd = x.data, kernel.data
    length = xd.shape[-2]
    y = kd[0] * xd
    for j in range(1, min(width, length)):
        y[..., j:, :] += kd[j] * xd[..., :length - j, :]
    out = Tensor(y)

    def backward(g):
        dx = kd[0] * g
        dk = np.zeros_like(kd)
        lead = tuple(range(g.ndim - 1))
        dk[0] = (g * xd).sum(axis=lead)
        for j in range(1, min(width, length)):
            dx[..., :length - j, :] += kd[j] * g[..., j:, :]
            dk[j] = (g[..., j:, :] * xd[..., :length - j, :]).sum(axis=lead)
        return dx, dk

    _record(out, (x, kernel), backward)
    return out


def causal_conv_flops(length: int, channels: int, width: int) -> int:
    """Multiplies performed by the padded shift-and-scale algorithm."""
    return length * channels * width


# ---------------------------------------------------------------------------
# selective scan
# ---------------------------------------------------------------------------


@dataclass
class ScanContext:
    """Forward activations retained for the analytic reverse recurrence.

    ``decay`` and ``states`` are stored length-major, (L, B, C, S), so the
    sequential loops touch contiguous blocks.
    """

    x: np.ndarray        # (B, L, C)
    dtp: np.ndarray      # (B, L, C) pre-softplus step sizes
    delta: np.ndarray    # (B, L, C)
    b_t: np.ndarray      # (B, L, S)
    c_t: np.ndarray      # (B, L, S)
    decay: np.ndarray    # (L, B, C, S)
    states: np.ndarray   # (L, B, C, S)
    h0: np.ndarray       # (B, C, S)
    neg_decay: np.ndarray  # A = -exp(a_log), (C, S)
    skip: np.ndarray     # (C,)
    dt_weight: np.ndarray
    b_weight: np.ndarray
    c_weight: np.ndarray


def _scan_forward(x, h0, a_log, skip, dt_w, dt_b, b_w, c_w):
    batch, length, channels = x.shape
    state_dim = a_log.shape[1]
    dtp = x @ dt_w + dt_b
    delta = np.maximum(dtp, 0.0) + np.log1p(np.exp(-np.abs(dtp)))
    b_t = x @ b_w
    c_t = x @ c_w
    neg_decay = -np.exp(a_log)
    # length-major contiguous buffers keep the sequential loop cheap
    decay = np.exp(delta.transpose(1, 0, 2)[..., None] * neg_decay)
    inject = (delta * x).transpose(1, 0, 2)[..., None] * b_t.transpose(1, 0, 2)[:, :, None, :]
    states = np.empty((length, batch, channels, state_dim), dtype=x.dtype)
    prev = h0.astype(x.dtype, copy=True)
    for t in range(length):
        cur = states[t]
        np.multiply(decay[t], prev, out=cur)
        cur += inject[t]
        prev = cur
    y = np.einsum("lbcs,bls->blc", states, c_t) + skip * x
    ctx = ScanContext(
        x=x, dtp=dtp, delta=delta, b_t=b_t, c_t=c_t, decay=decay,
        states=states, h0=h0, neg_decay=neg_decay, skip=skip,
        dt_weight=dt_w, b_weight=b_w, c_weight=c_w,
    )
    return y, prev.copy(), ctx


def selective_scan_backward(ctx: ScanContext | None, grad_y: np.ndarray,
                            grad_h_last: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Exact reverse recurrence over the retained forward activations.

    Returns gradients for the input and every parameter, keyed like
    :meth:`SelectiveScanParams.tensors` suffixes plus ``x`` and ``h0``.
    """
    if ctx is None:
        raise ContractError("selective_scan_backward needs the retained forward context")
    x, states, decay = ctx.x, ctx.states, ctx.decay
    length, batch, channels, state_dim = states.shape
    gy = grad_y
    carry = (np.zeros_like(states[0]) if grad_h_last is None
             else grad_h_last.astype(states.dtype, copy=True))
    gy_state = gy.transpose(1, 0, 2)[..., None] * ctx.c_t.transpose(1, 0, 2)[:, :, None, :]
    g_decay = np.empty_like(decay)
    g_inject = np.empty_like(decay)
    for t in range(length - 1, -1, -1):
        g_h = g_inject[t]
        np.add(carry, gy_state[t], out=g_h)
        h_prev = states[t - 1] if t > 0 else ctx.h0
        np.multiply(g_h, h_prev, out=g_decay[t])
        carry = g_h * decay[t]
    grad_h0 = carry

    d_c_t = np.einsum("lbcs,blc->bls", states, gy)
    d_skip = np.einsum("blc,blc->c", gy, x)
    dx = gy * ctx.skip

    # decay = exp(delta * A)
    decay_term = g_decay * decay
    d_delta = np.einsum("lbcs,cs->blc", decay_term, ctx.neg_decay)
    d_neg_decay = np.einsum("lbcs,blc->cs", decay_term, ctx.delta)
    d_a_log = d_neg_decay * ctx.neg_decay  # d(-exp(a))/da = -exp(a)

    # inject = delta * x * b_t
    inj_bt = np.einsum("lbcs,bls->blc", g_inject, ctx.b_t)
    d_delta += inj_bt * x
    dx += inj_bt * ctx.delta
    d_b_t = np.einsum("lbcs,blc->bls", g_inject, ctx.delta * x)

    d_dtp = d_delta * _sigmoid_data(ctx.dtp)
    dx += d_dtp @ ctx.dt_weight.T
    d_dt_w = np.einsum("blc,blj->cj", x, d_dtp)
    d_dt_b = d_dtp.sum(axis=(0, 1))

    dx += d_b_t @ ctx.b_weight.T
    d_b_w = np.einsum("blc,bls->cs", x, d_b_t)
    dx += d_c_t @ ctx.c_weight.T
    d_c_w = np.einsum("blc,bls->cs", x, d_c_t)

    return {
        "x": dx,
        "a_log": d_a_log,
        "skip": d_skip,
        "dt_weight": d_dt_w,
        "dt_bias": d_dt_b,
        "b_weight": d_b_w,
        "c_weight": d_c_w,
        "h0": grad_h0,
    }


def selective_scan(x, params: SelectiveScanParams, initial_state=None) -> tuple[Tensor, Tensor]:
    """Run the scan over (..., L, C); returns per-step outputs and final state.

    ``initial_state`` defaults to zeros of shape (C, S); pass the returned
    final state back in to continue a sequence exactly.
    """
    x = as_tensor(x)
    if x.ndim not in (2, 3):
        raise ShapeError(f"selective_scan expects (L, C) or (B, L, C), got {x.shape}")
    if x.shape[-1] != params.channels:
        raise ShapeError(f"input channels {x.shape[-1]} != params channels {params.channels}")
    if x.shape[-2] < 1:
        raise ShapeError("sequence length must be >= 1")
    if not np.all(np.isfinite(x.data)):
        bad = np.argwhere(~np.isfinite(x.data))[0]
        raise NumericError(f"non-finite scan input at index {tuple(int(i) for i in bad)}")

    batched = x.ndim == 3
    state_shape = (params.channels, params.state_dim)
    if initial_state is None:
        initial_state = Tensor(np.zeros(state_shape, dtype=x.dtype))
    else:
        initial_state = as_tensor(initial_state)
    if initial_state.shape[-2:] != state_shape:
        raise ShapeError(f"initial state must end in {state_shape}, got {initial_state.shape}")

    xb = x.data if batched else x.data[None]
    h0 = initial_state.data
    h0b = h0 if h0.ndim == 3 else np.broadcast_to(h0, (xb.shape[0],) + state_shape)

    y_data, h_last, ctx = _scan_forward(
        xb, h0b, params.a_log.data, params.skip.data,
        params.dt_weight.data, params.dt_bias.data,
        params.b_weight.data, params.c_weight.data,
    )
    y = Tensor(y_data if batched else y_data[0])
    final_state = Tensor(h_last if (batched or h0.ndim == 3) else h_last[0])

    def backward(gy, gh):
        gyb = gy if batched else gy[None]
        ghb = gh if gh.ndim == 3 else gh[None]
        grads = selective_scan_backward(ctx, gyb, ghb)
        gx = grads["x"] if batched else grads["x"][0]
        gh0 = grads["h0"]
        if initial_state.ndim == 2:
            gh0 = gh0.sum(axis=0)
        return (
            gx, grads["a_log"], grads["skip"], grads["dt_weight"],
            grads["dt_bias"], grads["b_weight"], grads["c_weight"], gh0,
        )

    _record(
        (y, final_state),
        (x, params.a_log, params.skip, params.dt_weight, params.dt_bias,
         params.b_weight, params.c_weight, initial_state),
        backward,
    )
    return y, final_state


def selective_scan_flops(length: int, channels: int, state_dim: int) -> int:
    """Multiplies (exp/softplus counted once per element) in the scan algorithm."""
    per_step = channels * channels + 3 * channels + 7 * channels * state_dim
    return length * per_step
