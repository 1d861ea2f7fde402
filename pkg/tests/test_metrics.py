import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tscast.metrics import (
    dtw_bruteforce,
    dtw_exact,
    dtw_exact_path,
    dtw_multivariate,
    fastdtw,
    mae_metric,
)


# ---------------------------------------------------------------------------
# MAE


def test_mae_equal_inputs():
    assert mae_metric([1.0, 2.0], [1.0, 2.0]) == 0.0


def test_mae_hand_value():
    assert mae_metric([1.0, -1.0], [0.0, 0.0]) == 1.0


def test_mae_shape_mismatch():
    with pytest.raises(ValueError):
        mae_metric([1.0], [1.0, 2.0])


def test_mae_below_rmse():
    rng = np.random.default_rng(0)
    for _ in range(50):
        p, t = rng.normal(size=12), rng.normal(size=12)
        mse = float(np.mean((p - t) ** 2))
        assert mae_metric(p, t) <= np.sqrt(mse) + 1e-12


# ---------------------------------------------------------------------------
# exact DTW


def test_dtw_identical_sequences():
    assert dtw_exact([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0


def test_dtw_hand_dp_table():
    # full table by hand for a=[1,2,3], b=[2,3,4]:
    # optimal alignment 1-2, 2-2?, ... min cumulative cost = 2
    assert dtw_exact([1.0, 2.0, 3.0], [2.0, 3.0, 4.0]) == 2.0


def test_dtw_forced_alignment():
    # single row: |5-1| + |5-2|
    assert dtw_exact([5.0], [1.0, 2.0]) == 7.0


def test_dtw_rejects_empty():
    with pytest.raises(ValueError):
        dtw_exact([], [1.0])


def test_dtw_symmetry():
    rng = np.random.default_rng(1)
    for _ in range(30):
        a, b = rng.normal(size=8), rng.normal(size=5)
        assert dtw_exact(a, b) == pytest.approx(dtw_exact(b, a), abs=1e-12)


def test_dtw_path_invariants():
    rng = np.random.default_rng(2)
    for _ in range(25):
        n, m = rng.integers(1, 10, size=2)
        a, b = rng.normal(size=n), rng.normal(size=m)
        cost, path = dtw_exact_path(a, b)
        assert path[0] == (0, 0)
        assert path[-1] == (n - 1, m - 1)
        for (i0, j0), (i1, j1) in zip(path, path[1:]):
            assert (i1 - i0, j1 - j0) in {(1, 0), (0, 1), (1, 1)}
        assert cost >= 0.0


# ---------------------------------------------------------------------------
# brute force oracle agreement


def test_bruteforce_identical():
    assert dtw_bruteforce([3.0, 1.0], [3.0, 1.0]) == 0.0


def test_bruteforce_reversal_symmetry():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b = rng.normal(size=5), rng.normal(size=4)
        assert dtw_bruteforce(a, b) == pytest.approx(dtw_bruteforce(a[::-1], b[::-1]), abs=1e-12)


def test_bruteforce_size_guard():
    with pytest.raises(ValueError):
        dtw_bruteforce(np.zeros(8), np.zeros(3))


def test_dtw_exact_matches_bruteforce_exhaustively():
    rng = np.random.default_rng(4)
    values = rng.normal(size=16)
    for n, m in itertools.product(range(1, 7), range(1, 7)):
        a = values[:n]
        b = values[16 - m :]
        assert dtw_exact(a, b) == pytest.approx(dtw_bruteforce(a, b), abs=1e-12)


# ---------------------------------------------------------------------------
# FastDTW


def test_fastdtw_full_radius_equals_exact():
    rng = np.random.default_rng(5)
    for _ in range(25):
        n, m = rng.integers(2, 40, size=2)
        a, b = rng.normal(size=n), rng.normal(size=m)
        radius = int(max(n, m))
        assert fastdtw(a, b, radius) == pytest.approx(dtw_exact(a, b), abs=1e-12)


def test_fastdtw_base_case_equals_exact():
    rng = np.random.default_rng(6)
    for radius in (0, 1, 2):
        limit = radius + 2
        for _ in range(10):
            a = rng.normal(size=rng.integers(1, limit + 1))
            b = rng.normal(size=rng.integers(1, limit + 1))
            assert fastdtw(a, b, radius) == pytest.approx(dtw_exact(a, b), abs=1e-12)


def test_fastdtw_never_below_exact():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n, m = rng.integers(2, 64, size=2)
        a, b = rng.normal(size=n), rng.normal(size=m)
        assert fastdtw(a, b, 1) >= dtw_exact(a, b) - 1e-12


def test_fastdtw_radius_one_accuracy():
    # smoothed random walks, the shape DTW is used on here (the pipeline
    # smooths every series); white noise is a known hard case for the
    # multilevel scheme and is not representative
    from tscast.preprocess import gaussian_kernel

    kernel = gaussian_kernel(5, 2.0)
    rng = np.random.default_rng(8)
    hits = 0
    trials = 300
    for _ in range(trials):
        n, m = rng.integers(2, 64, size=2)
        a, b = np.cumsum(rng.normal(size=n)), np.cumsum(rng.normal(size=m))
        if n >= 5:
            a = np.convolve(np.pad(a, 2, mode="reflect"), kernel, mode="valid")
        if m >= 5:
            b = np.convolve(np.pad(b, 2, mode="reflect"), kernel, mode="valid")
        exact = dtw_exact(a, b)
        approx = fastdtw(a, b, 1)
        if approx <= exact * 1.10 + 1e-12:
            hits += 1
    assert hits / trials >= 0.95


def test_fastdtw_radius_monotone_on_corpus():
    # growing the radius widens each refinement band, but the coarse path
    # itself can shift, so monotonicity is statistical, not a theorem;
    # convergence to the exact cost at full radius is unconditional
    rng = np.random.default_rng(9)
    steps = violations = 0
    for _ in range(60):
        n, m = rng.integers(8, 48, size=2)
        a = np.cumsum(rng.normal(size=n))
        b = np.cumsum(rng.normal(size=m))
        costs = [fastdtw(a, b, r) for r in (0, 1, 2, 4, max(n, m))]
        for lo, hi in zip(costs, costs[1:]):
            steps += 1
            violations += hi > lo + 1e-9
        assert costs[-1] == pytest.approx(dtw_exact(a, b), abs=1e-12)
    assert violations / steps < 0.01


def test_fastdtw_rejects_negative_radius():
    with pytest.raises(ValueError):
        fastdtw([1.0, 2.0], [1.0], -1)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-50, 50), min_size=1, max_size=6),
    st.lists(st.floats(-50, 50), min_size=1, max_size=6),
)
def test_dtw_exact_equals_bruteforce_property(a, b):
    assert dtw_exact(a, b) == pytest.approx(dtw_bruteforce(a, b), abs=1e-9)


# ---------------------------------------------------------------------------
# multivariate aggregation


def test_multivariate_sums_per_variable():
    rng = np.random.default_rng(10)
    p = rng.normal(size=(9, 3))
    t = rng.normal(size=(7, 3))
    total = dtw_multivariate(p, t)
    parts = sum(dtw_exact(p[:, j], t[:, j]) for j in range(3))
    assert total == pytest.approx(parts, abs=1e-12)


def test_multivariate_univariate_input():
    p = np.array([1.0, 2.0, 3.0])
    t = np.array([2.0, 3.0, 4.0])
    assert dtw_multivariate(p, t) == pytest.approx(dtw_exact(p, t), abs=1e-12)
