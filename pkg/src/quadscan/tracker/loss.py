"""Tracking loss: penalty-reduced focal heatmap term plus box regression.

total = cls + iou_weight * (1 - GIoU) + l1_weight * L1(normalized corners)

The box terms read the offset/size maps at the argmax cell of the predicted
heatmap (the cell choice itself is not differentiated, matching the decode
path). Default weights are 2.0 and 5.0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from quadscan.errors import InputError
from quadscan.numerics.tensor import (
    Tensor,
    abs_,
    concat,
    div,
    mul,
    neg,
    pick_cells,
    relu,
    sigmoid,
    slice_along,
    softplus,
    sub,
)
from quadscan.tracker.model import HeadOutput, encode_targets

FOCAL_ALPHA = 2  # exponent on the miss probability at positives
FOCAL_BETA = 4   # penalty-reduction exponent on soft negatives


@dataclass
class LossTerms:
    total: Tensor
    cls: Tensor
    iou: Tensor
    l1: Tensor


def focal_loss(cls_logits: Tensor, target: np.ndarray) -> Tensor:
    """Penalty-reduced focal loss against a Gaussian-splatted heatmap.

    ``target`` has exactly one cell equal to 1.0 per batch row; the loss is
    normalized by the number of those positives.
    """
    pos = (target >= 1.0).astype(cls_logits.dtype)
    n_pos = max(float(pos.sum()), 1.0)
    log_p = neg(softplus(neg(cls_logits)))
    log_1mp = neg(softplus(cls_logits))
    p = sigmoid(cls_logits)
    miss = sub(1.0, p)
    pos_term = mul(mul(mul(miss, miss), log_p), pos)
    reduction = (1.0 - target) ** FOCAL_BETA
    neg_term = mul(mul(mul(mul(p, p), log_1mp), reduction), 1.0 - pos)
    return neg((pos_term + neg_term).sum()) * (1.0 / n_pos)


def _columns(box: Tensor) -> tuple[Tensor, Tensor, Tensor, Tensor]:
    return tuple(slice_along(box, -1, i, i + 1) for i in range(4))


def _pairwise_max(a, b):
    return a + relu(sub(b, a))


def _pairwise_min(a, b):
    return sub(a, relu(sub(a, b)))


def giou_pairwise(pred_corners: Tensor, gt_corners: np.ndarray) -> Tensor:
    """GIoU per row for (B, 4) [x1, y1, x2, y2] boxes; differentiable in pred."""
    gt = Tensor(np.asarray(gt_corners, dtype=pred_corners.dtype))
    ax1, ay1, ax2, ay2 = _columns(pred_corners)
    bx1, by1, bx2, by2 = _columns(gt)
    iw = relu(sub(_pairwise_min(ax2, bx2), _pairwise_max(ax1, bx1)))
    ih = relu(sub(_pairwise_min(ay2, by2), _pairwise_max(ay1, by1)))
    inter = mul(iw, ih)
    area_a = mul(sub(ax2, ax1), sub(ay2, ay1))
    area_b = mul(sub(bx2, bx1), sub(by2, by1))
    union = sub(area_a + area_b, inter)
    cw = sub(_pairwise_max(ax2, bx2), _pairwise_min(ax1, bx1))
    ch = sub(_pairwise_max(ay2, by2), _pairwise_min(ay1, by1))
    enclose = mul(cw, ch)
    return sub(div(inter, union), div(sub(enclose, union), enclose))


def _pred_corners_at(head: HeadOutput, cells: np.ndarray) -> Tensor:
    """Differentiable [x1, y1, x2, y2] from offset/size maps at given cells."""
    stride = head.search_px / head.grid_side
    col = (cells % head.grid_side).astype(np.float64)
    row = (cells // head.grid_side).astype(np.float64)
    off = pick_cells(head.offset, cells)       # (B, 2)
    size = pick_cells(head.size, cells)        # (B, 2)
    base = np.stack([(col + 0.5) * stride, (row + 0.5) * stride], axis=1)
    center = off * stride + Tensor(base.astype(off.dtype))
    half = size * (head.search_px / 2.0)
    cx, cy = slice_along(center, -1, 0, 1), slice_along(center, -1, 1, 2)
    hw, hh = slice_along(half, -1, 0, 1), slice_along(half, -1, 1, 2)
    return concat([sub(cx, hw), sub(cy, hh), cx + hw, cy + hh], axis=-1)


def tracking_loss(head: HeadOutput, gt_boxes: np.ndarray, radius: float,
                  iou_weight: float = 2.0, l1_weight: float = 5.0) -> LossTerms:
    """Full loss for a batch of ground-truth [x1, y1, w, h] boxes in crop pixels."""
    gt = np.asarray(gt_boxes, dtype=np.float64)
    if np.any(gt[:, 2] <= 0) or np.any(gt[:, 3] <= 0):
        raise InputError("degenerate ground-truth box (non-positive width/height)")
    x_overlap = np.minimum(gt[:, 0] + gt[:, 2], head.search_px) - np.maximum(gt[:, 0], 0)
    y_overlap = np.minimum(gt[:, 1] + gt[:, 3], head.search_px) - np.maximum(gt[:, 1], 0)
    if np.any(x_overlap <= 0) or np.any(y_overlap <= 0):
        raise InputError("ground-truth box does not intersect the search region")

    heat, _, _, _ = encode_targets(gt, head.grid_side, head.search_px, radius)
    cls = focal_loss(head.cls_logits, heat.astype(head.cls_logits.dtype))

    pred_cells = head.heatmap.data.argmax(axis=1)
    pred_corners = _pred_corners_at(head, pred_cells)
    gt_corners = np.stack(
        [gt[:, 0], gt[:, 1], gt[:, 0] + gt[:, 2], gt[:, 1] + gt[:, 3]], axis=1
    )
    iou_term = sub(1.0, giou_pairwise(pred_corners, gt_corners)).mean()
    l1_term = abs_(
        sub(pred_corners * (1.0 / head.search_px),
            Tensor((gt_corners / head.search_px).astype(pred_corners.dtype)))
    ).mean()
    total = cls + iou_weight * iou_term + l1_weight * l1_term
    return LossTerms(total=total, cls=cls, iou=iou_term, l1=l1_term)
