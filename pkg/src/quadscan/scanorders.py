"""Bijective scan orders over the concatenated multi-modal token sequence.

Canonical layout: modality-major concatenation of per-modality sequences,
each laid out as [template tokens raster-major; search tokens raster-major].
Every order is a pure function of the geometry, never of token values.

The four scales:
  modal-forward   whole modality at a time, canonical order (the identity)
  modal-backward  full reversal of the forward order
  region          all template tokens first, then the four template-sized
                  quadrants of the search grid (TL, TR, BL, BR), cycling
                  through the modalities inside each quadrant
  token           modalities interleaved position by position
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from quadscan.errors import GeometryError, ShapeError
from quadscan.numerics.tensor import Tensor, permute_rows

MODAL_FORWARD = "modal-forward"
MODAL_BACKWARD = "modal-backward"
REGION = "region"
TOKEN = "token"

SCALES = (MODAL_FORWARD, MODAL_BACKWARD, REGION, TOKEN)


@dataclass(frozen=True)
class TokenGeometry:
    """Shape of the fused token sequence: modality count and per-stream split."""

    modalities: int
    template_tokens: int
    search_tokens: int

    def __post_init__(self):
        if self.modalities < 1:
            raise GeometryError(f"need at least one modality, got {self.modalities}")
        if self.template_tokens < 0 or self.search_tokens < 0:
            raise GeometryError("token counts must be non-negative")
        if self.tokens_per_stream < 1:
            raise GeometryError("each stream needs at least one token")

    @classmethod
    def from_template(cls, modalities: int, template_tokens: int) -> "TokenGeometry":
        """Standard geometry: the search grid is four template-sized regions."""
        return cls(modalities, template_tokens, 4 * template_tokens)

    @property
    def tokens_per_stream(self) -> int:
        return self.template_tokens + self.search_tokens

    @property
    def total_tokens(self) -> int:
        return self.modalities * self.tokens_per_stream

    @property
    def template_side(self) -> int:
        side = math.isqrt(self.template_tokens)
        if side * side != self.template_tokens:
            raise GeometryError(
                f"template token count {self.template_tokens} is not a square grid"
            )
        return side

    @property
    def search_side(self) -> int:
        if self.search_tokens != 4 * self.template_tokens:
            raise GeometryError(
                f"search token count {self.search_tokens} is not four template regions "
                f"of {self.template_tokens}"
            )
        return 2 * self.template_side


@dataclass(frozen=True)
class ScanOrder:
    """A bijection over the flattened token index space, plus its inverse."""

    scale: str
    perm: np.ndarray
    inv: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        object.__setattr__(self, "perm", perm)
        sorted_perm = np.sort(perm)
        if not np.array_equal(sorted_perm, np.arange(perm.size)):
            raise GeometryError(f"{self.scale}: permutation is not a bijection")
        object.__setattr__(self, "inv", np.argsort(perm))

    def __len__(self) -> int:
        return int(self.perm.size)


def forward_order(geo: TokenGeometry) -> ScanOrder:
    """Modality-major, token-ascending: identical to the canonical layout."""
    return ScanOrder(MODAL_FORWARD, np.arange(geo.total_tokens))


def backward_order(geo: TokenGeometry) -> ScanOrder:
    """Full reversal of the forward order."""
    return ScanOrder(MODAL_BACKWARD, np.arange(geo.total_tokens)[::-1])


def region_order(geo: TokenGeometry) -> ScanOrder:
    """Template tokens modality-major, then template-sized search quadrants.

    Quadrants are visited TL, TR, BL, BR (the first pair, then the second);
    within a quadrant each modality contributes its block in raster order.
    """
    side = geo.template_side  # raises GeometryError for non-square templates
    search_side = geo.search_side
    n = geo.tokens_per_stream
    visit = []
    for m in range(geo.modalities):
        base = m * n
        visit.extend(range(base, base + geo.template_tokens))
    for q_row in (0, 1):
        for q_col in (0, 1):
            for m in range(geo.modalities):
                base = m * n + geo.template_tokens
                for r in range(side):
                    row = q_row * side + r
                    start = base + row * search_side + q_col * side
                    visit.extend(range(start, start + side))
    return ScanOrder(REGION, np.asarray(visit, dtype=np.int64))


def token_order(geo: TokenGeometry) -> ScanOrder:
    """Interleave modalities per token position: (m0,n0), (m1,n0), ..., (m0,n1), ..."""
    n = geo.tokens_per_stream
    grid = np.arange(geo.total_tokens).reshape(geo.modalities, n)
    return ScanOrder(TOKEN, grid.T.reshape(-1))


def all_orders(geo: TokenGeometry) -> dict[str, ScanOrder]:
    return {
        MODAL_FORWARD: forward_order(geo),
        MODAL_BACKWARD: backward_order(geo),
        REGION: region_order(geo),
        TOKEN: token_order(geo),
    }


def apply_order(order: ScanOrder, seq):
    """Serialize rows into visit order: out[i] = seq[perm[i]]. Accepts Tensor or ndarray."""
    _check_rows(order, seq)
    if isinstance(seq, Tensor):
        return permute_rows(seq, order.perm)
    return np.take(np.asarray(seq), order.perm, axis=-2)


def unapply_order(order: ScanOrder, seq):
    """Exact inverse of :func:`apply_order`."""
    _check_rows(order, seq)
    if isinstance(seq, Tensor):
        return permute_rows(seq, order.inv)
    return np.take(np.asarray(seq), order.inv, axis=-2)


def _check_rows(order: ScanOrder, seq) -> None:
    shape = seq.shape
    if len(shape) < 2 or shape[-2] != len(order):
        raise ShapeError(
            f"sequence rows {shape} do not match scan order length {len(order)}"
        )


def scan_dump_lines(geo: TokenGeometry) -> list[str]:
    """One comma-separated index line per scale, in canonical scale order."""
    orders = all_orders(geo)
    return [",".join(str(i) for i in orders[scale].perm) for scale in SCALES]
