"""Dense float tensors with reverse-mode automatic differentiation.

Primitives executed under an active :class:`Tape` append a backward closure to
the tape. Replaying the tape back-to-front visits each recorded op exactly
once in reverse execution order (a valid reverse topological order), so
gradient accumulation is sequential and bit-reproducible.

Broadcasting is deliberately restricted: two shapes combine only when one is
a trailing suffix of the other (this covers scalars, bias vectors, and a
leading batch axis). Anything fancier raises :class:`ShapeError`.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from quadscan.errors import ContractError, ShapeError

_ACTIVE_TAPES: list["Tape"] = []

_FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


def active_tape() -> "Tape | None":
    return _ACTIVE_TAPES[-1] if _ACTIVE_TAPES else None


class Tape:
    """Ordered record of executed primitives with their backward rules.

    ``dtype`` is the tape's working precision: float64 for oracle/grad-check
    mode, float32 for training. One tape per worker; tapes are not shared
    across threads.
    """

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        if self.dtype not in _FLOAT_DTYPES:
            raise ContractError(f"tape dtype must be float32 or float64, got {self.dtype}")
        self._entries: list[tuple[tuple[Tensor, ...], tuple, Callable]] = []

    def __enter__(self) -> "Tape":
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        _ACTIVE_TAPES.pop()
        return False

    def __len__(self) -> int:
        return len(self._entries)

    def record(self, outputs: tuple["Tensor", ...], inputs: tuple, backward: Callable) -> None:
        self._entries.append((outputs, inputs, backward))

    def backward(self, loss: "Tensor") -> dict["Tensor", np.ndarray]:
        """Propagate d(loss)/d(leaf) to every reachable requires_grad leaf.

        ``loss`` must be a scalar produced under this tape. Sets ``.grad`` on
        each leaf (replacing any previous value) and returns a leaf -> grad
        map. Repeated invocations on the same tape give identical results.
        """
        if not isinstance(loss, Tensor) or loss.data.size != 1:
            raise ContractError("backward requires a scalar loss tensor")
        if not (loss._traced or loss.requires_grad):
            raise ContractError("loss is not connected to this tape")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}
        if loss.requires_grad:
            leaves[id(loss)] = loss
        for outputs, inputs, backward in reversed(self._entries):
            grads_out = [grads.get(id(o)) for o in outputs]
            if all(g is None for g in grads_out):
                continue
            grads_out = [
                np.zeros_like(o.data) if g is None else g
                for o, g in zip(outputs, grads_out)
            ]
            grads_in = backward(*grads_out)
            for t, g in zip(inputs, grads_in):
                if g is None or not isinstance(t, Tensor):
                    continue
                if not (t.requires_grad or t._traced):
                    continue
                prev = grads.get(id(t))
                grads[id(t)] = g if prev is None else prev + g
                if t.requires_grad:
                    leaves[id(t)] = t
        result: dict[Tensor, np.ndarray] = {}
        for key, leaf in leaves.items():
            g = grads.get(key)
            if g is None:
                g = np.zeros_like(leaf.data)
            g = np.ascontiguousarray(g)
            leaf.grad = g
            result[leaf] = g
        return result


class Tensor:
    """A shaped block of float32/float64 values, immutable by convention.

    ``requires_grad`` marks optimization leaves; intermediate results carry an
    internal traced flag instead. Gradients land in ``.grad`` after
    ``Tape.backward``.
    """

    __slots__ = ("data", "requires_grad", "grad", "_traced")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._traced = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _bad_item(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims: bool = False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return mean_(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def _bad_item(t: Tensor):
    raise ContractError(f"item() requires a single-element tensor, got shape {t.shape}")


def as_tensor(value, dtype=None) -> Tensor:
    """Wrap arrays/scalars as constant tensors; pass tensors through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=dtype)


def _coerce_pair(a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype))
    elif isinstance(b, Tensor) and not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=b.dtype))
    elif not isinstance(a, Tensor):
        a, b = Tensor(a), Tensor(b)
    return a, b


def _record(outputs, inputs, backward) -> None:
    tape = active_tape()
    if tape is None:
        return
    if not any(isinstance(t, Tensor) and (t.requires_grad or t._traced) for t in inputs):
        return
    outs = outputs if isinstance(outputs, tuple) else (outputs,)
    for o in outs:
        o._traced = True
    tape.record(outs, tuple(inputs), backward)


def _check_suffix_broadcast(sa: tuple[int, ...], sb: tuple[int, ...]) -> None:
    small, big = (sa, sb) if len(sa) <= len(sb) else (sb, sa)
    if len(big) != len(small) and big[len(big) - len(small):] != small:
        raise ShapeError(f"shapes {sa} and {sb} are not leading-dim broadcastable")
    if len(big) == len(small) and big != small:
        raise ShapeError(f"shapes {sa} and {sb} are not leading-dim broadcastable")


def _reduce_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    return grad


# ---------------------------------------------------------------------------
# elementwise primitives
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    _check_suffix_broadcast(a.shape, b.shape)
    out = Tensor(a.data + b.data)

    def backward(g):
        return _reduce_to(g, a.shape), _reduce_to(g, b.shape)

    _record(out, (a, b), backward)
    return out


def sub(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    _check_suffix_broadcast(a.shape, b.shape)
    out = Tensor(a.data - b.data)

    def backward(g):
        return _reduce_to(g, a.shape), _reduce_to(-g, b.shape)

    _record(out, (a, b), backward)
    return out


def mul(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    _check_suffix_broadcast(a.shape, b.shape)
    out = Tensor(a.data * b.data)

    def backward(g):
        return _reduce_to(g * b.data, a.shape), _reduce_to(g * a.data, b.shape)

    _record(out, (a, b), backward)
    return out


def div(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    _check_suffix_broadcast(a.shape, b.shape)
    out = Tensor(a.data / b.data)

    def backward(g):
        ga = _reduce_to(g / b.data, a.shape)
        gb = _reduce_to(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    _record(out, (a, b), backward)
    return out


def neg(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(-a.data)
    _record(out, (a,), lambda g: (-g,))
    return out


def abs_(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.abs(a.data))
    sign = np.sign(a.data)
    _record(out, (a,), lambda g: (g * sign,))
    return out


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    out = Tensor(np.where(mask, a.data, 0.0))
    _record(out, (a,), lambda g: (g * mask,))
    return out


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.exp(a.data))
    out_data = out.data
    _record(out, (a,), lambda g: (g * out_data,))
    return out


def _sigmoid_data(x: np.ndarray) -> np.ndarray:
    # tanh form stays finite for any input magnitude
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = _sigmoid_data(a.data)
    out = Tensor(s)
    _record(out, (a,), lambda g: (g * s * (1.0 - s),))
    return out


def softplus(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    out = Tensor(np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x))))

    def backward(g):
        return (g * _sigmoid_data(x),)

    _record(out, (a,), backward)
    return out


def silu(a) -> Tensor:
    """x * sigmoid(x)."""
    a = as_tensor(a)
    x = a.data
    s = _sigmoid_data(x)
    out = Tensor(x * s)

    def backward(g):
        return (g * (s + x * s * (1.0 - s)),)

    _record(out, (a,), backward)
    return out


# ---------------------------------------------------------------------------
# linear algebra / reductions
# ---------------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    sa, sb = a.shape, b.shape
    if len(sa) < 2 or len(sb) < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {sa} @ {sb}")
    if sa[-1] != sb[-2]:
        raise ShapeError(f"matmul inner dims differ: {sa} @ {sb}")
    la, lb = sa[:-2], sb[:-2]
    if la and lb and la != lb:
        raise ShapeError(f"matmul leading dims differ: {sa} @ {sb}")
    out = Tensor(a.data @ b.data)

    def backward(g):
        ga = _reduce_to(g @ np.swapaxes(b.data, -1, -2), a.shape)
        gb = _reduce_to(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    _record(out, (a, b), backward)
    return out


def _norm_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    out = Tensor(a.data.sum(axis=axes, keepdims=keepdims))

    def backward(g):
        gg = g
        if not keepdims:
            for ax in sorted(axes):
                gg = np.expand_dims(gg, ax)
        return (np.broadcast_to(gg, a.shape).copy(),)

    _record(out, (a,), backward)
    return out


def mean_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    count = 1
    for ax in axes:
        count *= a.shape[ax]
    out = Tensor(a.data.mean(axis=axes, keepdims=keepdims))

    def backward(g):
        gg = g
        if not keepdims:
            for ax in sorted(axes):
                gg = np.expand_dims(gg, ax)
        return (np.broadcast_to(gg, a.shape).copy() / count,)

    _record(out, (a,), backward)
    return out


def softmax(a) -> Tensor:
    """Softmax over the last axis."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y)

    def backward(g):
        inner = (g * y).sum(axis=-1, keepdims=True)
        return ((g - inner) * y,)

    _record(out, (a,), backward)
    return out


def layernorm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale+shift."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    if gain.shape != x.shape[-1:] or bias.shape != x.shape[-1:]:
        raise ShapeError(
            f"layernorm affine params must have shape {x.shape[-1:]}, "
            f"got {gain.shape} and {bias.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = Tensor(xhat * gain.data + bias.data)

    def backward(g):
        lead = tuple(range(g.ndim - 1))
        dgain = (g * xhat).sum(axis=lead)
        dbias = g.sum(axis=lead)
        dxhat = g * gain.data
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return dx, dgain, dbias

    _record(out, (x, gain, bias), backward)
    return out


def normalized(x, eps: float = 1e-5) -> Tensor:
    """Layernorm without the affine part (exposed for normalization checks)."""
    x = as_tensor(x)
    ones = Tensor(np.ones(x.shape[-1], dtype=x.dtype))
    zeros = Tensor(np.zeros(x.shape[-1], dtype=x.dtype))
    return layernorm(x, ones, zeros, eps=eps)


# ---------------------------------------------------------------------------
# structural primitives
# ---------------------------------------------------------------------------


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.reshape(tuple(shape)))
    src_shape = a.shape
    _record(out, (a,), lambda g: (g.reshape(src_shape),))
    return out


def transpose_axes(a, axes: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    if len(axes) != a.ndim:
        raise ShapeError(f"transpose axes {axes} do not match ndim {a.ndim}")
    out = Tensor(np.ascontiguousarray(a.data.transpose(axes)))
    inverse = tuple(np.argsort(axes))
    _record(out, (a,), lambda g: (g.transpose(inverse),))
    return out


def swap_last(a) -> Tensor:
    """Transpose the trailing two axes (matrix transpose with batch dims)."""
    a = as_tensor(a)
    axes = tuple(range(a.ndim - 2)) + (a.ndim - 1, a.ndim - 2)
    return transpose_axes(a, axes)


def concat(parts: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(p) for p in parts]
    if not tensors:
        raise ShapeError("concat of zero tensors")
    axis = axis % tensors[0].ndim
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    _record(out, tuple(tensors), backward)
    return out


def slice_along(a, axis: int, start: int, stop: int) -> Tensor:
    a = as_tensor(a)
    axis = axis % a.ndim
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = Tensor(np.ascontiguousarray(a.data[index]))

    def backward(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    _record(out, (a,), backward)
    return out


def permute_rows(a, perm: np.ndarray) -> Tensor:
    """Reorder along axis -2: out[..., i, :] = a[..., perm[i], :]."""
    a = as_tensor(a)
    perm = np.asarray(perm, dtype=np.int64)
    if a.ndim < 2:
        raise ShapeError("permute_rows needs at least a 2-d tensor")
    if perm.shape != (a.shape[-2],):
        raise ShapeError(
            f"permutation length {perm.shape} does not match row count {a.shape[-2]}"
        )
    out = Tensor(np.take(a.data, perm, axis=-2))
    inverse = np.argsort(perm)
    _record(out, (a,), lambda g: (np.take(g, inverse, axis=-2),))
    return out


def embed_rows(table, ids: np.ndarray) -> Tensor:
    """Row lookup out[..., :] = table[ids[...], :] with scatter-add backward."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    out = Tensor(np.take(table.data, ids, axis=0))

    def backward(g):
        dt = np.zeros_like(table.data)
        np.add.at(dt, ids.reshape(-1), g.reshape(-1, table.shape[-1]))
        return (dt,)

    _record(out, (table,), backward)
    return out


def broadcast_rows(a, count: int) -> Tensor:
    """Tile a single row: (..., 1, C) -> (..., count, C)."""
    a = as_tensor(a)
    if a.ndim < 2 or a.shape[-2] != 1:
        raise ShapeError(f"broadcast_rows expects row axis of size 1, got {a.shape}")
    target = a.shape[:-2] + (count, a.shape[-1])
    out = Tensor(np.broadcast_to(a.data, target).copy())
    _record(out, (a,), lambda g: (g.sum(axis=-2, keepdims=True),))
    return out


def pick_cells(a, idx: np.ndarray) -> Tensor:
    """Select one row per batch item: (B, N, C), (B,) -> (B, C)."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    if a.ndim != 3 or idx.shape != (a.shape[0],):
        raise ShapeError(f"pick_cells expects (B, N, C) and (B,), got {a.shape}, {idx.shape}")
    rows = np.arange(a.shape[0])
    out = Tensor(a.data[rows, idx])

    def backward(g):
        da = np.zeros_like(a.data)
        np.add.at(da, (rows, idx), g)
        return (da,)

    _record(out, (a,), backward)
    return out
