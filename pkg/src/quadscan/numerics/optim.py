"""AdamW with decoupled weight decay, operating on name -> ndarray dicts."""

from __future__ import annotations

import numpy as np

from quadscan.errors import ShapeError


def adamw_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    exp_avg: dict[str, np.ndarray],
    exp_avg_sq: dict[str, np.ndarray],
    step: int,
    *,
    lr: float = 1e-5,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 1e-4,
) -> bool:
    """Apply one bias-corrected AdamW update in place. ``step`` is 1-based.

    Returns False and leaves params and moments untouched when any gradient
    contains a non-finite value (the whole step is skipped).
    """
    if step < 1:
        raise ShapeError("step must be >= 1")
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.shape} for '{name}'")
        if not np.all(np.isfinite(g)):
            return False
    b1, b2 = betas
    c1 = 1.0 - b1 ** step
    c2 = 1.0 - b2 ** step
    for name, p in params.items():
        g = grads[name]
        m = exp_avg[name]
        v = exp_avg_sq[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + eps)
        if weight_decay:
            update = update + weight_decay * p
        p -= (lr * update).astype(p.dtype, copy=False)
    return True


class AdamW:
    """Stateful convenience wrapper around :func:`adamw_step` for a param dict."""

    def __init__(self, params, lr: float = 1e-5, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 1e-4):
        # params: name -> Tensor (updated in place through .data)
        self.params = params
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.skipped = 0
        self._m = {k: np.zeros_like(t.data) for k, t in params.items()}
        self._v = {k: np.zeros_like(t.data) for k, t in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> bool:
        self.step_count += 1
        data = {k: t.data for k, t in self.params.items()}
        applied = adamw_step(
            data, grads, self._m, self._v, self.step_count,
            lr=self.lr, betas=self.betas, eps=self.eps,
            weight_decay=self.weight_decay,
        )
        if not applied:
            self.skipped += 1
        return applied
