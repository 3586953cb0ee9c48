from __future__ import annotations

import numpy as np
import pytest

from pluralsem import LengthMismatch
from pluralsem.stats import pearson, pearson_matrix, pearson_rows


def test_pearson_matches_corrcoef_oracle():
    rng = np.random.default_rng(101)
    for _ in range(200):
        n = int(rng.integers(3, 40))
        x = rng.normal(size=n)
        y = rng.normal(size=n)
        expected = np.corrcoef(x, y)[0, 1]
        assert pearson(x, y) == pytest.approx(expected, abs=1e-12)


def test_pearson_perfect_and_anti():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert pearson(x, 2.0 * x + 1.0) == pytest.approx(1.0)
    assert pearson(x, -x) == pytest.approx(-1.0)


def test_pearson_zero_variance_is_zero():
    x = np.array([2.0, 2.0, 2.0])
    y = np.array([1.0, 5.0, 9.0])
    assert pearson(x, y) == 0.0
    assert pearson(y, x) == 0.0
    assert pearson(x, x) == 0.0


def test_pearson_clips_to_unit_interval():
    # near-collinear data can round a hair outside [-1, 1]
    rng = np.random.default_rng(7)
    for _ in range(50):
        x = rng.normal(size=10)
        r = pearson(x, x * 3.0)
        assert -1.0 <= r <= 1.0


def test_pearson_length_mismatch():
    with pytest.raises(LengthMismatch):
        pearson(np.zeros(3), np.zeros(4))


def test_pearson_rows_matches_elementwise():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(6, 12))
    v = rng.normal(size=12)
    rows = pearson_rows(a, v)
    for i in range(6):
        assert rows[i] == pytest.approx(pearson(a[i], v), abs=1e-12)


def test_pearson_rows_zero_variance_cases():
    v = np.arange(5.0)
    a = np.vstack([np.ones(5), v * 2.0])
    rows = pearson_rows(a, v)
    assert rows[0] == 0.0
    assert rows[1] == pytest.approx(1.0)
    # constant reference vector zeroes everything
    assert np.all(pearson_rows(a, np.full(5, 3.0)) == 0.0)


def test_pearson_matrix_matches_pairwise_loop():
    rng = np.random.default_rng(11)
    preds = rng.normal(size=(4, 8))
    gold = rng.normal(size=(7, 8))
    m = pearson_matrix(preds, gold)
    assert m.shape == (4, 7)
    for i in range(4):
        for j in range(7):
            assert m[i, j] == pytest.approx(pearson(preds[i], gold[j]), abs=1e-10)


def test_pearson_matrix_constant_gold_row():
    rng = np.random.default_rng(2)
    preds = rng.normal(size=(3, 6))
    gold = np.vstack([rng.normal(size=6), np.full(6, 4.0)])
    m = pearson_matrix(preds, gold)
    assert np.all(m[:, 1] == 0.0)
