"""The Z_n process over a partition grid and the KS / CV statistics.

For a tuple ``(m_1, ..., m_k)`` the field value is::

    n^{-3/2} * sum_{l=1..k} sum_{i=m_{l-1}+1..m_l} sum_{j=m_l+1..m_{l+1}} [h(X_i, X_j) - theta]

with ``m_0 = 1`` and ``m_{k+1} = n`` (1-based), so X_1 never enters the sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal

import numpy as np

from cpustat.core import (
    EmptyGrid,
    GridMismatch,
    KernelSpec,
    NonPositiveVariance,
    PartitionGrid,
    Series,
    WrongKernel,
)

if TYPE_CHECKING:
    from numpy.typing import NDArray

Method = Literal["auto", "bilinear", "summed", "brute"]


@dataclass(frozen=True)
class ZField:
    """Field values aligned row-by-row with ``grid.tuples``."""

    grid: PartitionGrid
    values: NDArray[np.float64]
    theta_used: float

    def __getitem__(self, tup: tuple[int, ...]) -> float:
        rows = self.grid.tuples
        hit = np.flatnonzero((rows == np.asarray(tup)).all(axis=1))
        if hit.size == 0:
            raise KeyError(tup)
        return float(self.values[hit[0]])

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {t: float(v) for t, v in zip(self.grid, self.values)}


def theta_plugin(series: Series, kernel: KernelSpec) -> float:
    """V-statistic estimate ``(1/n^2) sum_i sum_j h(X_i, X_j)``.

    Antisymmetric kernels return 0 without summing.
    """
    if kernel.antisymmetric:
        return 0.0
    x = series.values
    n = series.n
    if kernel.kind == "indicator_less":
        srt = np.sort(x)
        # number of j with x_j > x_i, summed over i
        greater = n - np.searchsorted(srt, x, side="right")
        return float(greater.sum()) / (n * n)
    return float(kernel.matrix(x).sum()) / (n * n)


def centering(series: Series, kernel: KernelSpec) -> float:
    """Known null value of theta when available, plug-in estimate otherwise."""
    if kernel.theta_null is not None:
        return float(kernel.theta_null)
    return theta_plugin(series, kernel)


def _boundaries(grid: PartitionGrid) -> NDArray[np.int64]:
    tuples = grid.tuples
    T = tuples.shape[0]
    bounds = np.empty((T, grid.k + 2), dtype=np.int64)
    bounds[:, 0] = 1
    bounds[:, 1:-1] = tuples
    bounds[:, -1] = grid.n
    return bounds


def fast_bilinear(series: Series, grid: PartitionGrid, theta: float = 0.0) -> ZField:
    """Exact field for h(x, y) = x - y via prefix sums.

    Uses ``sum_{i in (a,b]} sum_{j in (b,c]} (X_i - X_j)
    = (c-b)(P_b - P_a) - (b-a)(P_c - P_b)`` with ``P_r = X_1 + ... + X_r``.
    """
    if grid.n != series.n:
        raise GridMismatch(f"grid n={grid.n} but series n={series.n}")
    if grid.count == 0:
        raise EmptyGrid("partition grid has no tuples")
    P = np.concatenate(([0.0], np.cumsum(series.values)))
    bounds = _boundaries(grid)
    total = np.zeros(bounds.shape[0])
    for l in range(1, grid.k + 1):
        a = bounds[:, l - 1]
        b = bounds[:, l]
        c = bounds[:, l + 1]
        left = (b - a).astype(np.float64)
        right = (c - b).astype(np.float64)
        total += right * (P[b] - P[a]) - left * (P[c] - P[b])
        if theta != 0.0:
            total -= theta * left * right
    return ZField(grid, total * series.n ** -1.5, float(theta))


def _summed_area(series: Series, kernel: KernelSpec, grid: PartitionGrid, theta: float) -> ZField:
    H = kernel.matrix(series.values) - theta
    S = np.zeros((series.n + 1, series.n + 1))
    S[1:, 1:] = H.cumsum(axis=0).cumsum(axis=1)
    bounds = _boundaries(grid)
    total = np.zeros(bounds.shape[0])
    for l in range(1, grid.k + 1):
        a = bounds[:, l - 1]
        b = bounds[:, l]
        c = bounds[:, l + 1]
        # block rows (a, b], cols (b, c]
        total += S[b, c] - S[a, c] - S[b, b] + S[a, b]
    return ZField(grid, total * series.n ** -1.5, float(theta))


def brute_force(series: Series, kernel: KernelSpec, grid: PartitionGrid, theta: float) -> ZField:
    """Direct block summation of the kernel matrix for every tuple."""
    H = kernel.matrix(series.values) - theta
    n = series.n
    out = np.empty(grid.count)
    for r, tup in enumerate(grid):
        m = (1, *tup, n)
        acc = 0.0
        for l in range(1, grid.k + 1):
            # 1-based i in (m_{l-1}, m_l], j in (m_l, m_{l+1}]
            acc += H[m[l - 1] : m[l], m[l] : m[l + 1]].sum()
        out[r] = acc
    return ZField(grid, out * n ** -1.5, float(theta))


def z_field(
    series: Series,
    kernel: KernelSpec,
    grid: PartitionGrid,
    theta: float | None = None,
    method: Method = "auto",
) -> ZField:
    """Evaluate the centered, n^{-3/2}-scaled field on every grid tuple.

    ``method="auto"`` uses the prefix-sum path for the difference kernel and a
    summed-area table of the kernel matrix otherwise. ``"brute"`` sums each
    block directly and serves as the reference.
    """
    if grid.n != series.n:
        raise GridMismatch(f"grid n={grid.n} but series n={series.n}")
    if grid.count == 0:
        raise EmptyGrid("partition grid has no tuples")
    if theta is None:
        theta = centering(series, kernel)
    if method == "auto":
        method = "bilinear" if kernel.kind == "difference" else "summed"
    if method == "bilinear":
        if kernel.kind != "difference":
            raise WrongKernel(f"prefix-sum path needs the difference kernel, got {kernel.kind}")
        return fast_bilinear(series, grid, theta)
    if method == "summed":
        return _summed_area(series, kernel, grid, theta)
    if method == "brute":
        return brute_force(series, kernel, grid, theta)
    raise ValueError(f"unknown method {method!r}")


def ks_statistic(zfield: ZField) -> float:
    """max |Z| over the grid."""
    if zfield.values.size == 0:
        raise EmptyGrid("partition grid has no tuples")
    return float(np.abs(zfield.values).max())


def cv_statistic(zfield: ZField, n: int | None = None, k: int | None = None, stride: int | None = None) -> float:
    """``(stride^k / n^k) * sum Z^2``; with stride 1 this is the plain grid average over n^k."""
    if zfield.values.size == 0:
        raise EmptyGrid("partition grid has no tuples")
    g = zfield.grid
    n = g.n if n is None else n
    k = g.k if k is None else k
    stride = g.stride if stride is None else stride
    return float(np.dot(zfield.values, zfield.values)) * (stride / n) ** k


def normalize(t1: float, t2: float, sigma2: float) -> tuple[float, float]:
    if not sigma2 > 0:
        raise NonPositiveVariance(f"long-run variance must be positive, got {sigma2}")
    return t1 / np.sqrt(sigma2), t2 / sigma2


def locate_changes(zfield: ZField) -> tuple[int, ...]:
    """Tuple maximizing |Z|; ties go to the lexicographically smallest."""
    if zfield.values.size == 0:
        raise EmptyGrid("partition grid has no tuples")
    r = int(np.argmax(np.abs(zfield.values)))
    return tuple(int(v) for v in zfield.grid.tuples[r])
