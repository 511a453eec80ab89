"""Scan-order construction versus independent loop-nest oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadscan.errors import GeometryError, ShapeError
from quadscan.numerics import Tensor
from quadscan.scanorders import (
    SCALES,
    ScanOrder,
    TokenGeometry,
    all_orders,
    apply_order,
    backward_order,
    forward_order,
    region_order,
    scan_dump_lines,
    token_order,
    unapply_order,
)


def brute_force_region(geo: TokenGeometry) -> list[int]:
    """Independent oracle: slice each search grid into four template-sized
    blocks with explicit 2-d index arrays."""
    side = int(np.sqrt(geo.template_tokens))
    search = 2 * side
    n = geo.tokens_per_stream
    visit = []
    for m in range(geo.modalities):
        visit.extend(m * n + i for i in range(geo.template_tokens))
    grids = [
        np.arange(geo.search_tokens).reshape(search, search) + m * n + geo.template_tokens
        for m in range(geo.modalities)
    ]
    for qr, qc in ((0, 0), (0, 1), (1, 0), (1, 1)):
        for grid in grids:
            block = grid[qr * side:(qr + 1) * side, qc * side:(qc + 1) * side]
            visit.extend(int(v) for v in block.reshape(-1))
    return visit


def brute_force_token(geo: TokenGeometry) -> list[int]:
    n = geo.tokens_per_stream
    visit = []
    for i in range(n):
        for m in range(geo.modalities):
            visit.append(m * n + i)
    return visit


def test_forward_is_identity_examples():
    assert forward_order(TokenGeometry(2, 3, 0)).perm.tolist() == [0, 1, 2, 3, 4, 5]
    assert forward_order(TokenGeometry(4, 1, 4)).perm.tolist() == list(range(20))


def test_backward_is_reversal():
    geo = TokenGeometry(2, 3, 0)
    assert backward_order(geo).perm.tolist() == [5, 4, 3, 2, 1, 0]
    fwd = forward_order(geo)
    bwd = backward_order(geo)
    total = geo.total_tokens
    assert np.array_equal(bwd.perm, total - 1 - fwd.perm)
    # composing forward with the inverse of backward gives the reversal
    comp = fwd.perm[bwd.inv]
    assert comp.tolist() == list(range(total))[::-1]


def test_region_spec_example():
    geo = TokenGeometry(2, 1, 4)
    assert region_order(geo).perm.tolist() == [0, 5, 1, 6, 2, 7, 3, 8, 4, 9]


def test_region_single_modality_unit_template_is_identity():
    geo = TokenGeometry(1, 1, 4)
    assert region_order(geo).perm.tolist() == list(range(5))


def test_region_matches_brute_force_oracle():
    geo = TokenGeometry(4, 4, 16)
    assert region_order(geo).perm.tolist() == brute_force_region(geo)


def test_region_rejects_non_square_template():
    with pytest.raises(GeometryError):
        region_order(TokenGeometry(2, 8, 32))
    with pytest.raises(GeometryError):
        region_order(TokenGeometry(2, 4, 8))  # search not four template regions


def test_token_examples_and_oracle():
    assert token_order(TokenGeometry(2, 3, 0)).perm.tolist() == [0, 3, 1, 4, 2, 5]
    assert token_order(TokenGeometry(1, 2, 0)).perm.tolist() == [0, 1]
    geo = TokenGeometry(3, 4, 16)
    assert token_order(geo).perm.tolist() == brute_force_token(geo)


def test_token_index_identity():
    geo = TokenGeometry(4, 4, 16)
    order = token_order(geo)
    n = geo.tokens_per_stream
    for i in range(n):
        for m in range(geo.modalities):
            assert order.perm[i * geo.modalities + m] == m * n + i


def test_token_grouped_by_modality_restores_forward():
    geo = TokenGeometry(3, 1, 4)
    order = token_order(geo)
    n = geo.tokens_per_stream
    regrouped = order.perm.reshape(n, geo.modalities).T.reshape(-1)
    assert np.array_equal(regrouped, forward_order(geo).perm)


def test_all_orders_bijections_with_inverses():
    for m in range(1, 5):
        for nz in (1, 4, 16, 64):
            geo = TokenGeometry.from_template(m, nz)
            for scale, order in all_orders(geo).items():
                assert np.array_equal(np.sort(order.perm), np.arange(geo.total_tokens)), scale
                assert np.array_equal(order.inv[order.perm], np.arange(geo.total_tokens))


def test_region_visits_templates_first_and_cycles_modalities():
    geo = TokenGeometry.from_template(3, 4)
    order = region_order(geo)
    n = geo.tokens_per_stream
    n_template = geo.modalities * geo.template_tokens
    head = order.perm[:n_template]
    assert all(idx % n < geo.template_tokens for idx in head)
    tail = order.perm[n_template:]
    side = geo.template_side
    # within each quadrant the modality changes every side*side tokens, cycling with period M
    block = side * side
    modality_of = tail // n
    for q in range(4):
        quadrant = modality_of[q * geo.modalities * block:(q + 1) * geo.modalities * block]
        expected = np.repeat(np.arange(geo.modalities), block)
        assert np.array_equal(quadrant, expected)


def test_apply_unapply_round_trip_tensor_and_ndarray(rng):
    geo = TokenGeometry.from_template(2, 4)
    seq = rng.standard_normal((geo.total_tokens, 3))
    for order in all_orders(geo).values():
        out = unapply_order(order, apply_order(order, seq))
        assert np.array_equal(out, seq)
        t = Tensor(seq)
        out_t = unapply_order(order, apply_order(order, t))
        assert np.array_equal(out_t.data, seq)
    assert np.array_equal(apply_order(forward_order(geo), seq), seq)


def test_apply_rejects_length_mismatch(rng):
    geo = TokenGeometry.from_template(2, 4)
    order = forward_order(geo)
    with pytest.raises(ShapeError):
        apply_order(order, rng.standard_normal((7, 3)))


@given(st.integers(min_value=2, max_value=64), st.data())
@settings(max_examples=60, deadline=None)
def test_random_permutation_round_trip(n, data):
    perm = np.array(data.draw(st.permutations(range(n))), dtype=np.int64)
    order = ScanOrder("token", perm)
    seq = np.random.default_rng(n).standard_normal((n, 2))
    assert np.array_equal(unapply_order(order, apply_order(order, seq)), seq)
    assert np.array_equal(order.inv[order.perm], np.arange(n))


def test_random_permutation_fuzz_1000_trials(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        order = ScanOrder("token", rng.permutation(n))
        seq = rng.standard_normal((n, 2))
        assert np.array_equal(unapply_order(order, apply_order(order, seq)), seq)


def test_scan_order_rejects_non_bijection():
    with pytest.raises(GeometryError):
        ScanOrder("token", np.array([0, 0, 1]))


def test_orders_depend_only_on_geometry():
    geo = TokenGeometry.from_template(4, 16)
    lines_a = scan_dump_lines(geo)
    lines_b = scan_dump_lines(TokenGeometry.from_template(4, 16))
    assert lines_a == lines_b
    assert len(lines_a) == len(SCALES) == 4


def test_geometry_validation():
    with pytest.raises(GeometryError):
        TokenGeometry(0, 1, 4)
    with pytest.raises(GeometryError):
        TokenGeometry(2, 0, 0)
    geo = TokenGeometry.from_template(4, 64)
    assert geo.tokens_per_stream == 320
    assert geo.total_tokens == 1280
    assert geo.template_side == 8
    assert geo.search_side == 16
