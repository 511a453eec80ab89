"""Central finite-difference gradient checking (the independent oracle)."""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from quadscan.numerics.tensor import Tape, Tensor


def finite_difference(
    loss_fn: Callable[[], float],
    tensor: Tensor,
    eps: float = 1e-5,
    coords: Iterable[tuple[int, ...]] | None = None,
) -> dict[tuple[int, ...], float]:
    """Central differences of a scalar loss wrt selected coordinates of ``tensor``.

    ``loss_fn`` re-runs the forward pass from scratch on each call; this path
    never touches the analytic backward rules.
    """
    flat = tensor.data.reshape(-1)
    if coords is None:
        coords = [np.unravel_index(i, tensor.data.shape) for i in range(flat.size)]
    out: dict[tuple[int, ...], float] = {}
    for coord in coords:
        coord = tuple(int(c) for c in np.atleast_1d(np.asarray(coord)))
        original = tensor.data[coord]
        tensor.data[coord] = original + eps
        hi = loss_fn()
        tensor.data[coord] = original - eps
        lo = loss_fn()
        tensor.data[coord] = original
        out[coord] = (hi - lo) / (2.0 * eps)
    return out


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    scale = max(abs(analytic), abs(numeric), floor)
    return abs(analytic - numeric) / scale


def check_gradients(
    loss_fn: Callable[[], Tensor],
    tensors: dict[str, Tensor],
    eps: float = 1e-5,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
    floor: float = 1e-6,
) -> float:
    """Compare tape gradients of ``loss_fn()`` against central differences.

    Returns the worst relative error over all checked coordinates. When a
    tensor has more than ``max_coords`` entries, a random subset is probed.
    """
    with Tape(dtype=np.float64) as tape:
        loss = loss_fn()
    tape.backward(loss)
    analytic = {name: t.grad for name, t in tensors.items()}

    def scalar_loss() -> float:
        return float(loss_fn().data)

    worst = 0.0
    for name, t in tensors.items():
        n = t.data.size
        if max_coords is not None and n > max_coords:
            if rng is None:
                rng = np.random.default_rng(0)
            picks = rng.choice(n, size=max_coords, replace=False)
        else:
            picks = range(n)
        coords = [np.unravel_index(int(i), t.data.shape) for i in picks]
        numeric = finite_difference(scalar_loss, t, eps=eps, coords=coords)
        grad = analytic[name]
        assert grad is not None, f"no gradient reached tensor '{name}'"
        for coord, fd in numeric.items():
            err = relative_error(float(grad[coord]), fd, floor=floor)
            worst = max(worst, err)
    return worst
