from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import triple_loop_z
from cpustat.core import (
    DIFFERENCE,
    INDICATOR_LESS,
    EmptyGrid,
    GridMismatch,
    NonPositiveVariance,
    PartitionGrid,
    WrongKernel,
    user_kernel,
    validate_series,
)
from cpustat.ustat import (
    ZField,
    brute_force,
    centering,
    cv_statistic,
    fast_bilinear,
    ks_statistic,
    locate_changes,
    normalize,
    theta_plugin,
    z_field,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def rel_dev(a, b):
    scale = max(np.abs(b).max(), 1e-300)
    return float(np.abs(a - b).max() / scale)


class TestThetaPlugin:
    def test_difference_is_zero(self, rng):
        s = validate_series(rng.normal(size=30))
        assert theta_plugin(s, DIFFERENCE) == 0.0

    def test_indicator_small_example(self):
        assert theta_plugin(validate_series([1, 2, 3, 4]), INDICATOR_LESS) == pytest.approx(6 / 16)

    def test_indicator_distinct_values(self, rng):
        n = 57
        s = validate_series(rng.permutation(n).astype(float))
        assert theta_plugin(s, INDICATOR_LESS) == pytest.approx((n * n - n) / (2 * n * n))

    def test_indicator_matches_matrix_mean_with_ties(self, rng):
        x = rng.integers(0, 5, size=40).astype(float)
        s = validate_series(x)
        assert theta_plugin(s, INDICATOR_LESS) == pytest.approx(INDICATOR_LESS.matrix(x).mean())

    def test_centering_prefers_known_theta(self, rng):
        s = validate_series(rng.normal(size=20))
        assert centering(s, INDICATOR_LESS) == 0.5
        k = user_kernel(lambda x, y: (x - y) ** 2, vectorized=True)
        assert centering(s, k) == pytest.approx(k.matrix(s.values).mean())


class TestZField:
    def test_worked_example(self):
        s = validate_series([1, 2, 3, 4, 5, 6])
        f = z_field(s, DIFFERENCE, PartitionGrid(1, 6))
        assert f[(3,)] == pytest.approx(-15 * 6 ** -1.5)
        assert f[(3,)] == pytest.approx(-1.0206, abs=1e-4)

    def test_prefix_sum_identity(self):
        x = np.arange(1.0, 7.0)
        P = np.concatenate(([0.0], np.cumsum(x)))
        a, b, c = 1, 3, 6
        assert (c - b) * (P[b] - P[a]) - (b - a) * (P[c] - P[b]) == -15

    def test_constant_series_zero(self):
        s = validate_series([2.5] * 12)
        f = z_field(s, DIFFERENCE, PartitionGrid(2, 12))
        assert np.all(f.values == 0.0)
        assert ks_statistic(f) == 0.0
        assert cv_statistic(f) == 0.0

    def test_all_zero_series(self):
        f = fast_bilinear(validate_series(np.zeros(9)), PartitionGrid(2, 9))
        assert not f.values.any()

    def test_fast_equals_brute_n40(self, rng):
        s = validate_series(rng.normal(size=40))
        g = PartitionGrid(2, 40)
        fast = fast_bilinear(s, g)
        slow = brute_force(s, DIFFERENCE, g, 0.0)
        assert rel_dev(fast.values, slow.values) <= 1e-9

    @pytest.mark.parametrize("kernel", [DIFFERENCE, INDICATOR_LESS])
    def test_all_paths_match_triple_loop(self, rng, kernel):
        x = rng.normal(size=11)
        s = validate_series(x)
        g = PartitionGrid(2, 11)
        theta = centering(s, kernel)
        ref = np.array([triple_loop_z(x, kernel, t, theta) for t in g])
        methods = ["summed", "brute"] + (["bilinear"] if kernel is DIFFERENCE else [])
        for method in methods:
            got = z_field(s, kernel, g, method=method).values
            assert rel_dev(got, ref) <= 1e-9, method

    def test_user_kernel_plugin_centering(self, rng):
        x = rng.normal(size=10)
        k = user_kernel(lambda a, b: abs(a - b))
        s = validate_series(x)
        g = PartitionGrid(1, 10)
        f = z_field(s, k, g)
        theta = np.mean([abs(a - b) for a in x for b in x])
        assert f.theta_used == pytest.approx(theta)
        ref = np.array([triple_loop_z(x, k, t, theta) for t in g])
        assert rel_dev(f.values, ref) <= 1e-9

    def test_strided_grid_subset_of_full(self, rng):
        s = validate_series(rng.normal(size=30))
        full = z_field(s, DIFFERENCE, PartitionGrid(2, 30)).as_dict()
        part = z_field(s, DIFFERENCE, PartitionGrid(2, 30, stride=3))
        for tup, v in part.as_dict().items():
            assert v == full[tup]

    def test_grid_mismatch(self, rng):
        s = validate_series(rng.normal(size=10))
        with pytest.raises(GridMismatch):
            z_field(s, DIFFERENCE, PartitionGrid(2, 11))

    def test_wrong_kernel_for_fast_path(self, rng):
        s = validate_series(rng.normal(size=10))
        with pytest.raises(WrongKernel):
            z_field(s, INDICATOR_LESS, PartitionGrid(1, 10), method="bilinear")

    @settings(max_examples=50, deadline=None)
    @given(x=arrays(np.float64, st.integers(5, 25), elements=finite), k=st.integers(1, 2))
    def test_fast_matches_brute_property(self, x, k):
        if len(x) < k + 3:
            return
        s = validate_series(x)
        g = PartitionGrid(k, len(x))
        fast = fast_bilinear(s, g).values
        slow = brute_force(s, DIFFERENCE, g, 0.0).values
        assert np.allclose(fast, slow, rtol=1e-9, atol=1e-9 * max(1.0, np.abs(x).max()))



class TestStatistics:
    def test_ks_max_abs(self):
        f = ZField(PartitionGrid(1, 5), np.array([-2.0, 1.0, 0.5]), 0.0)
        assert ks_statistic(f) == 2.0

    def test_cv_weighting(self):
        f = ZField(PartitionGrid(1, 5), np.array([-2.0, 1.0, 0.5]), 0.0)
        assert cv_statistic(f) == pytest.approx(5.25 / 5)

    def test_cv_strided_weight(self, rng):
        s = validate_series(rng.normal(size=31))
        f = z_field(s, DIFFERENCE, PartitionGrid(2, 31, stride=2))
        assert cv_statistic(f) == pytest.approx(np.sum(f.values**2) * (2 / 31) ** 2)

    def test_empty_grid(self):
        f = ZField(PartitionGrid(1, 5), np.array([]), 0.0)
        with pytest.raises(EmptyGrid):
            ks_statistic(f)

    def test_normalize(self):
        assert normalize(2.0, 8.0, 4.0) == (1.0, 2.0)
        with pytest.raises(NonPositiveVariance):
            normalize(1.0, 1.0, 0.0)

    def test_locate_changes_finds_mean_shifts(self):
        x = np.r_[np.zeros(20), np.full(20, 5.0)]
        f = z_field(validate_series(x), DIFFERENCE, PartitionGrid(1, 40))
        assert locate_changes(f) == (20,)

    def test_tie_break_lexicographic(self):
        f = z_field(validate_series([1.0] * 8), DIFFERENCE, PartitionGrid(2, 8))
        assert locate_changes(f) == (2, 3)
