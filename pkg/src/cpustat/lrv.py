"""Long-run variance estimators for the projected series.

Four routes: AR(1) plug-in from Yule-Walker estimates (the default for
detection), Newey-West with a lag-window kernel, non-overlapping block
subsampling, and a lag-window estimate of the spectral density at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable, Literal

import numpy as np

from cpustat.core import CpustatError, KernelSpec, Series

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

RHO_MAX = 0.99
EPS = 1e-12

LrvMethod = Literal["ar1", "newey-west", "subsampling", "spectral"]


class DegenerateSeries(CpustatError):
    pass


class BadBandwidth(CpustatError):
    pass


class BadBlockLength(CpustatError):
    pass


class BadWeights(CpustatError):
    pass


@dataclass(frozen=True)
class LrvEstimate:
    sigma2: float
    method: str
    params: dict[str, Any] = field(default_factory=dict)
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "sigma2": self.sigma2,
            "method": self.method,
            "params": dict(self.params),
            "diagnostics": dict(self.diagnostics),
        }


def _as_array(x: Series | ArrayLike) -> NDArray[np.float64]:
    if isinstance(x, Series):
        return x.values
    return np.asarray(x, dtype=np.float64)


def _floor(value: float, diagnostics: dict[str, Any]) -> float:
    if not value > EPS:
        diagnostics["floored"] = True
        return EPS
    diagnostics["floored"] = False
    return float(value)


def yule_walker_ar1(series: Series | ArrayLike) -> tuple[float, float, float]:
    """Yule-Walker estimates ``(rho, mu, omega2)`` of an AR(1) with intercept.

    ``omega2`` averages the n-1 squared residuals ``X_t - mu - rho X_{t-1}``
    (t = 2..n) over n.
    """
    x = _as_array(series)
    n = x.shape[0]
    if n < 3:
        raise DegenerateSeries(f"need at least 3 observations, got {n}")
    xbar = x.mean()
    d = x - xbar
    denom = float(np.dot(d, d))
    if denom == 0.0 or not np.isfinite(denom):
        raise DegenerateSeries("series has zero sample variance")
    rho = float(np.dot(d[:-1], d[1:])) / denom
    mu = xbar * (1.0 - rho)
    resid = x[1:] - mu - rho * x[:-1]
    omega2 = float(np.dot(resid, resid)) / n
    return rho, float(mu), omega2


def sigma2_ar1_plugin(series: Series | ArrayLike, rho_max: float = RHO_MAX) -> LrvEstimate:
    """``omega2 / (1 - rho)^2`` with |rho| clamped at ``rho_max``."""
    rho, mu, omega2 = yule_walker_ar1(series)
    clamped = abs(rho) > rho_max
    rho_used = math.copysign(rho_max, rho) if clamped else rho
    diag: dict[str, Any] = {
        "rho": rho,
        "mu": mu,
        "omega2": omega2,
        "rho_used": rho_used,
        "clamped": clamped,
    }
    sigma2 = _floor(omega2 / (1.0 - rho_used) ** 2, diag)
    return LrvEstimate(sigma2, "ar1", {"rho_max": rho_max}, diag)


def autocovariances(x: Series | ArrayLike, max_lag: int) -> NDArray[np.float64]:
    """Sample autocovariances gamma(0..max_lag) with divisor n."""
    x = _as_array(x)
    n = x.shape[0]
    d = x - x.mean()
    max_lag = min(max_lag, n - 1)
    out = np.empty(max_lag + 1)
    for j in range(max_lag + 1):
        out[j] = np.dot(d[: n - j], d[j:]) / n
    return out


def bartlett(u: NDArray[np.float64] | float) -> NDArray[np.float64]:
    return np.maximum(0.0, 1.0 - np.abs(u))


def default_bandwidth(n: int) -> int:
    return math.ceil(1.3 * n ** (1.0 / 3.0))


def _weighted_sum(gamma: NDArray[np.float64], w: NDArray[np.float64]) -> float:
    # gamma(0) + 2 * sum_{j>=1} w_j gamma(j); shared by the lag-window routes
    L = w.shape[0]
    return float(gamma[0] + 2.0 * np.dot(w, gamma[1 : L + 1]))


def newey_west(
    proj: Series | ArrayLike,
    bandwidth: int | None = None,
    weight_kernel: Callable[[NDArray[np.float64]], NDArray[np.float64]] = bartlett,
) -> LrvEstimate:
    """``gamma(0) + 2 sum_{j=1..bandwidth} K(j / bandwidth) gamma(j)``."""
    x = _as_array(proj)
    n = x.shape[0]
    if bandwidth is None:
        bandwidth = default_bandwidth(n)
    if int(bandwidth) != bandwidth or bandwidth < 1:
        raise BadBandwidth(f"bandwidth must be a positive integer, got {bandwidth}")
    bandwidth = int(bandwidth)
    lags = np.arange(1, min(bandwidth, n - 1) + 1)
    w = np.asarray(weight_kernel(lags / bandwidth), dtype=np.float64)
    w = _trim(w)
    gamma = autocovariances(x, w.shape[0])
    diag: dict[str, Any] = {"gamma0": float(gamma[0])}
    sigma2 = _floor(_weighted_sum(gamma, w), diag)
    return LrvEstimate(sigma2, "newey-west", {"bandwidth": bandwidth}, diag)


def _trim(w: NDArray[np.float64]) -> NDArray[np.float64]:
    nz = np.flatnonzero(w)
    return w[: nz[-1] + 1] if nz.size else w[:0]


def subsampling_variance(proj: Series | ArrayLike, block_len: int | None = None) -> LrvEstimate:
    """Sample variance of ``sqrt(l) * (block mean - grand mean)`` over disjoint blocks."""
    x = _as_array(proj)
    n = x.shape[0]
    if block_len is None:
        block_len = max(2, math.ceil(n ** (1.0 / 3.0)))
    if int(block_len) != block_len or block_len < 2 or block_len > n / 2:
        raise BadBlockLength(f"block length must satisfy 2 <= l <= n/2, got {block_len} (n={n})")
    block_len = int(block_len)
    b = n // block_len
    means = x[: b * block_len].reshape(b, block_len).mean(axis=1)
    copies = math.sqrt(block_len) * (means - x.mean())
    diag: dict[str, Any] = {"n_blocks": b}
    sigma2 = _floor(float(np.var(copies, ddof=1)), diag)
    return LrvEstimate(sigma2, "subsampling", {"block_len": block_len}, diag)


def spectral_zero(
    proj: Series | ArrayLike,
    weights: Callable[[NDArray[np.int64]], NDArray[np.float64]] | ArrayLike | None = None,
) -> LrvEstimate:
    """``2 pi f(0)`` from the lag-window spectral estimate ``sum_{|j|<n} w(j) gamma(j)``.

    ``weights`` is a callable of the integer lag or an array ``w(0), w(1), ...``;
    the default is Bartlett at the Newey-West default bandwidth.
    """
    x = _as_array(proj)
    n = x.shape[0]
    params: dict[str, Any] = {}
    if weights is None:
        ell = default_bandwidth(n)
        params["bandwidth"] = ell
        weights = lambda j: bartlett(j / ell)  # noqa: E731
    if callable(weights):
        w_all = np.asarray(weights(np.arange(n)), dtype=np.float64)
    else:
        w_all = np.zeros(n)
        given = np.asarray(weights, dtype=np.float64)[:n]
        w_all[: given.shape[0]] = given
    if not np.all(np.isfinite(w_all)) or w_all[0] != 1.0 or np.any(np.abs(w_all) > 1.0):
        raise BadWeights("weights must be finite, bounded by 1 and satisfy w(0) = 1")
    w = _trim(w_all[1:])
    gamma = autocovariances(x, w.shape[0])
    diag: dict[str, Any] = {"gamma0": float(gamma[0]), "max_lag": int(w.shape[0])}
    sigma2 = _floor(_weighted_sum(gamma, w), diag)
    return LrvEstimate(sigma2, "spectral", params, diag)


def projection(series: Series, kernel: KernelSpec) -> NDArray[np.float64]:
    """Series whose long-run variance normalizes the statistics.

    Difference kernel: the raw series (its projection is affine in x).
    Indicator kernel: the empirical CDF values rank/n. Other kernels:
    the empirical first-order projection, row means of h minus their mean.
    """
    x = series.values
    if kernel.kind == "difference":
        return x
    if kernel.kind == "indicator_less":
        srt = np.sort(x)
        return np.searchsorted(srt, x, side="right") / series.n
    rows = kernel.matrix(x).mean(axis=1)
    return rows - rows.mean()


def estimate_lrv(proj: Series | ArrayLike, method: LrvMethod = "ar1", **params: Any) -> LrvEstimate:
    if method == "ar1":
        return sigma2_ar1_plugin(proj, **params)
    if method == "newey-west":
        return newey_west(proj, **params)
    if method == "subsampling":
        return subsampling_variance(proj, **params)
    if method == "spectral":
        return spectral_zero(proj, **params)
    raise CpustatError(f"unknown long-run variance method {method!r}")
