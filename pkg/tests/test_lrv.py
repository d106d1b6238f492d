from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpustat.core import DIFFERENCE, INDICATOR_LESS, user_kernel, validate_series
from cpustat.lrv import (
    EPS,
    BadBandwidth,
    BadBlockLength,
    BadWeights,
    DegenerateSeries,
    autocovariances,
    default_bandwidth,
    estimate_lrv,
    newey_west,
    projection,
    sigma2_ar1_plugin,
    spectral_zero,
    subsampling_variance,
    yule_walker_ar1,
)


def ar1_path(rng, n, rho, omega=1.0, burn=500):
    eps = rng.standard_normal(n + burn)
    x = np.empty(n + burn)
    prev = 0.0
    for t in range(n + burn):
        prev = rho * prev + omega * eps[t]
        x[t] = prev
    return x[burn:]


@pytest.fixture(scope="module")
def ar_half():
    return ar1_path(np.random.default_rng(11), 20000, 0.5)


class TestYuleWalker:
    def test_iid(self, rng):
        rho, mu, omega2 = yule_walker_ar1(rng.standard_normal(5000))
        assert -0.05 < rho < 0.05
        assert 0.9 < omega2 < 1.1

    def test_ar_half(self, rng):
        rho, _, _ = yule_walker_ar1(ar1_path(rng, 10000, 0.5))
        assert 0.45 < rho < 0.55

    def test_formulas_by_hand(self):
        x = np.array([1.0, 3.0, 2.0, 5.0, 4.0])
        xbar = x.mean()
        rho = sum((x[t - 1] - xbar) * (x[t] - xbar) for t in range(1, 5)) / sum((x - xbar) ** 2)
        mu = xbar * (1 - rho)
        omega2 = sum((x[t] - mu - rho * x[t - 1]) ** 2 for t in range(1, 5)) / 5
        assert yule_walker_ar1(x) == pytest.approx((rho, mu, omega2), rel=1e-14)

    def test_constant_series(self):
        with pytest.raises(DegenerateSeries):
            yule_walker_ar1(np.full(10, 3.0))


class TestAr1Plugin:
    def test_formula(self, rng):
        x = rng.standard_normal(300)
        est = sigma2_ar1_plugin(x)
        d = est.diagnostics
        assert est.sigma2 == pytest.approx(d["omega2"] / (1 - d["rho"]) ** 2)
        assert not d["clamped"]
        assert est.method == "ar1"

    def test_half_gives_four(self, ar_half):
        assert sigma2_ar1_plugin(ar_half).sigma2 == pytest.approx(4.0, rel=0.1)

    def test_clamp_flagged(self):
        x = np.linspace(0.0, 1.0, 400) + 1e-4 * np.sin(np.arange(400))
        est = sigma2_ar1_plugin(x)
        assert est.diagnostics["rho"] > 0.99
        assert est.diagnostics["clamped"]
        assert est.diagnostics["rho_used"] == 0.99
        assert est.sigma2 == pytest.approx(est.diagnostics["omega2"] / 0.01**2)


class TestNeweyWest:
    def test_iid(self, rng):
        x = rng.standard_normal(5000)
        est = newey_west(x, bandwidth=math.ceil(5000 ** (1 / 3)))
        assert 0.85 < est.sigma2 < 1.15

    def test_lag_zero_window_is_sample_variance(self, rng):
        x = rng.standard_normal(100)
        est = newey_west(x, bandwidth=1)
        assert est.sigma2 == pytest.approx(np.var(x))

    def test_ar_half(self, ar_half):
        assert newey_west(ar_half, bandwidth=40).sigma2 == pytest.approx(4.0, rel=0.15)

    def test_bad_bandwidth(self, rng):
        with pytest.raises(BadBandwidth):
            newey_west(rng.standard_normal(50), bandwidth=0)

    def test_default_bandwidth(self):
        assert default_bandwidth(1000) == math.ceil(13.0)

    def test_autocovariance_divisor_n(self):
        x = np.array([1.0, 2.0, 4.0, 8.0])
        d = x - x.mean()
        g = autocovariances(x, 2)
        assert g[2] == pytest.approx((d[0] * d[2] + d[1] * d[3]) / 4)


class TestSubsampling:
    def test_iid(self, rng):
        x = rng.standard_normal(10000)
        est = subsampling_variance(x, block_len=math.ceil(10000 ** (1 / 3)))
        assert 0.8 < est.sigma2 < 1.2

    def test_constant_floored(self):
        est = subsampling_variance(np.full(40, 1.5), block_len=4)
        assert est.sigma2 == EPS
        assert est.diagnostics["floored"]

    def test_ar_half(self, ar_half):
        assert subsampling_variance(ar_half, block_len=50).sigma2 == pytest.approx(4.0, rel=0.2)

    @pytest.mark.parametrize("block", [1, 51])
    def test_bad_block(self, rng, block):
        with pytest.raises(BadBlockLength):
            subsampling_variance(rng.standard_normal(100), block_len=block)


class TestSpectral:
    @pytest.mark.parametrize("ell", [1, 3, 7, 20])
    def test_bartlett_equals_newey_west(self, rng, ell):
        x = rng.standard_normal(300)
        w = 1.0 - np.arange(300) / ell
        a = spectral_zero(x, weights=np.clip(w, 0.0, None)).sigma2
        b = newey_west(x, bandwidth=ell).sigma2
        assert a == b

    def test_default_matches_default_newey_west(self, rng):
        x = rng.standard_normal(500)
        assert spectral_zero(x).sigma2 == newey_west(x).sigma2

    def test_rectangular_cut_at_zero(self, rng):
        x = rng.standard_normal(80)
        assert spectral_zero(x, weights=[1.0]).sigma2 == pytest.approx(np.var(x))

    def test_ar_half(self, ar_half):
        assert spectral_zero(ar_half, weights=lambda j: np.maximum(0, 1 - j / 40)).sigma2 == pytest.approx(4.0, rel=0.2)

    def test_bad_weights(self, rng):
        with pytest.raises(BadWeights):
            spectral_zero(rng.standard_normal(20), weights=[0.5, 0.2])


class TestInvariances:
    methods = [("ar1", {}), ("newey-west", {}), ("subsampling", {"block_len": 7}), ("spectral", {})]

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), lam=st.floats(0.01, 100.0), c=st.floats(-50.0, 50.0))
    def test_scale_and_translation(self, seed, lam, c):
        x = np.random.default_rng(seed).standard_normal(150)
        for method, params in self.methods:
            base = estimate_lrv(x, method, **params).sigma2
            assert estimate_lrv(lam * x, method, **params).sigma2 == pytest.approx(lam**2 * base, rel=1e-9)
            assert estimate_lrv(x + c, method, **params).sigma2 == pytest.approx(base, rel=1e-9)

    def test_positive(self, rng):
        x = rng.standard_normal(60)
        for method, params in self.methods:
            assert estimate_lrv(x, method, **params).sigma2 > 0


class TestProjection:
    def test_difference_is_raw(self, rng):
        s = validate_series(rng.standard_normal(10))
        assert np.array_equal(projection(s, DIFFERENCE), s.values)

    def test_indicator_is_ecdf(self):
        s = validate_series([3.0, 1.0, 2.0, 5.0])
        assert list(projection(s, INDICATOR_LESS)) == [0.75, 0.25, 0.5, 1.0]

    def test_user_kernel_centered_row_means(self, rng):
        s = validate_series(rng.standard_normal(12))
        k = user_kernel(lambda a, b: a * b, vectorized=True)
        p = projection(s, k)
        assert abs(p.sum()) < 1e-12
