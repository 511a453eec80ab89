"""Analytic cost model relations for the fusion benchmark."""

import numpy as np
import pytest

from quadscan.bench import (
    affine_fit_r2,
    attention_a_flops,
    attention_b_flops,
    bench_csv_text,
    bench_fusion,
)
from quadscan.errors import ConfigError


def test_joint_attention_costs_at_least_pairwise_at_tracker_scale():
    # joint sequence of 4N tokens vs three 2N sequences: the quadratic
    # attention term is 16N^2 vs 12N^2; linear terms favor the joint block
    for n in (80, 160):
        assert attention_b_flops(n, 16) >= attention_a_flops(n, 16)


def test_attention_b_quadratic_growth():
    dim = 16
    big = attention_b_flops(160, dim)
    small = attention_b_flops(80, dim)
    assert big / small >= 3.5
    huge = attention_b_flops(1280, dim)
    half = attention_b_flops(640, dim)
    assert 3.5 <= huge / half <= 4.0  # approaches 4 from below


def test_bench_rows_and_csv(tmp_path):
    rows = bench_fusion([20, 40], dim=8, state_dim=2, conv_width=2,
                        warmups=1, repeats=2)
    assert [r.total_tokens for r in rows] == [80, 160]
    assert rows[1].mfm_flops == 2 * rows[0].mfm_flops
    text = bench_csv_text(rows)
    header, *lines = text.splitlines()
    assert header.startswith("n_per_modality,total_tokens,mfm_flops")
    assert len(lines) == 2
    with pytest.raises(ConfigError):
        bench_fusion([21], dim=8)


def test_affine_fit_r2():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert affine_fit_r2(x, 3 * x + 2) == 1.0
    noisy = np.array([1.0, 4.0, 2.0, 8.0])
    assert affine_fit_r2(x, noisy) < 1.0
