import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stereomatch.exceptions import DataError
from stereomatch.image_io import CostVolume
from stereomatch.sgm import DIRECTIONS, SgmParams, aggregate, aggregate_path, normalize_costs

from oracles import viterbi_argmin, viterbi_table


def random_volume(rng, h, w, nd):
    return CostVolume(rng.random((h, w, nd)).astype(np.float32), 1.0)


def test_params_validation():
    with pytest.raises(ValueError):
        SgmParams(p1=0.5, p2=0.1)
    with pytest.raises(ValueError):
        SgmParams(num_paths=6)
    assert SgmParams().num_paths == 8


@pytest.mark.parametrize("paths", [4, 8])
def test_zero_penalties_multiply(rng, paths):
    cv = random_volume(rng, 7, 9, 5)
    out = aggregate(cv, SgmParams(0.0, 0.0, paths, normalize=False))
    assert np.array_equal(out.costs, paths * cv.costs.astype(np.float64))


def test_constant_volume_stays_flat():
    cv = CostVolume(np.full((6, 8, 4), 0.7, dtype=np.float32), 1.0)
    out = aggregate(cv, SgmParams(0.1, 0.5, 8, normalize=False)).costs
    assert np.all(out == out[:, :, :1])


def test_single_path_matches_viterbi(rng):
    for _ in range(30):
        n, nd = int(rng.integers(1, 7)), int(rng.integers(1, 4))
        costs = rng.integers(0, 20, size=(1, n, nd)).astype(np.float32)
        L = aggregate_path(CostVolume(costs, 20), (0, 1), 1.0, 3.0)
        assert np.argmin(L[0], axis=1).tolist() == viterbi_argmin(costs[0], 1.0, 3.0)


def test_reverse_path_matches_flipped_viterbi(rng):
    costs = rng.integers(0, 20, size=(1, 6, 3)).astype(np.float32)
    L = aggregate_path(CostVolume(costs, 20), (0, -1), 1.0, 3.0)
    expected = viterbi_argmin(costs[0, ::-1], 1.0, 3.0)[::-1]
    assert np.argmin(L[0], axis=1).tolist() == expected


def test_vertical_and_diagonal_paths_follow_their_lines(rng):
    """A diagonal path's values on one diagonal equal a horizontal pass over that diagonal."""
    c = rng.integers(0, 20, size=(5, 5, 3)).astype(np.float32)
    cv = CostVolume(c, 20)
    diag = aggregate_path(cv, (1, 1), 1.0, 3.0)
    line = np.stack([c[i, i] for i in range(5)])[None]
    ref = aggregate_path(CostVolume(line, 20), (0, 1), 1.0, 3.0)[0]
    assert np.array_equal(np.stack([diag[i, i] for i in range(5)]), ref)
    down = aggregate_path(cv, (1, 0), 1.0, 3.0)
    col = aggregate_path(CostVolume(c[:, 2][None], 20), (0, 1), 1.0, 3.0)[0]
    assert np.array_equal(down[:, 2], col)


def test_eight_paths_equal_sum_of_single_paths(rng):
    cv = random_volume(rng, 6, 7, 4)
    total = aggregate(cv, SgmParams(0.05, 0.4, 8, normalize=False)).costs
    parts = np.zeros(cv.shape)
    for r in DIRECTIONS:
        parts += aggregate_path(cv, r, 0.05, 0.4)
    assert np.array_equal(total, parts)


def test_constant_shift_equivariance():
    c = np.random.default_rng(3).integers(0, 50, size=(5, 6, 4)).astype(np.float32)
    p = SgmParams(2.0, 8.0, 8, normalize=False)
    a = aggregate(CostVolume(c, 50), p).costs
    b = aggregate(CostVolume(c + 16, 66), p).costs
    assert np.array_equal(b - a, np.full(a.shape, 8 * 16.0))
    assert np.array_equal(np.argmin(a, 2), np.argmin(b, 2))


def test_deterministic(rng):
    cv = random_volume(rng, 8, 8, 5)
    a = aggregate(cv).costs
    b = aggregate(cv).costs
    assert np.array_equal(a, b)


def test_non_finite_rejected():
    class Fake:
        costs = np.array([[[np.inf]]])

    with pytest.raises(DataError):
        aggregate(Fake())


def test_normalize_examples():
    c = np.array([[[0, 40, 80]]], np.float32)
    out = normalize_costs(CostVolume(c, 80)).costs[0, 0]
    assert out.tolist() == [0.0, 0.5, 1.0]
    c = np.array([[[-1, 0, 1]]], np.float32)
    assert normalize_costs(CostVolume(c, 1)).costs[0, 0, 0] == 0.0
    flat = normalize_costs(CostVolume(np.full((2, 2, 2), 3.0, np.float32), 3))
    assert not flat.costs.any()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_normalize_preserves_argmin(seed):
    rng = np.random.default_rng(seed)
    c = (rng.integers(0, 81, size=(4, 5, 6))).astype(np.float32)
    cv = CostVolume(c, 80)
    assert np.array_equal(np.argmin(c, 2), np.argmin(normalize_costs(cv).costs, 2))


def test_viterbi_oracles_agree(rng):
    for _ in range(20):
        n, nd = int(rng.integers(1, 6)), int(rng.integers(1, 4))
        costs = rng.integers(0, 20, size=(n, nd)).astype(float)
        table = viterbi_table(costs, 2.0, 5.0)
        assert np.argmin(table, axis=1).tolist() == viterbi_argmin(costs, 2.0, 5.0)
