"""End-to-end test of k change-points on one series."""

from __future__ import annotations

from typing import TYPE_CHECKING, Any, Sequence

import numpy as np

from cpustat.core import (
    DIFFERENCE,
    MAX_TUPLES,
    DetectionReport,
    KernelSpec,
    PartitionGrid,
    Series,
    validate_series,
)
from cpustat.lrv import EPS, LrvEstimate, LrvMethod, estimate_lrv, projection
from cpustat.nulldist import NullSamples, QuantileTable
from cpustat.ustat import (
    cv_statistic,
    ks_statistic,
    locate_changes,
    normalize,
    z_field,
)

if TYPE_CHECKING:
    from numpy.typing import ArrayLike


def statistics(
    series: Series,
    grid: PartitionGrid,
    kernel: KernelSpec = DIFFERENCE,
    lrv: LrvMethod = "ar1",
    lrv_params: dict[str, Any] | None = None,
    sigma2: float | None = None,
) -> tuple[float, float, float, float, LrvEstimate, tuple[int, ...], float]:
    """Raw and normalized statistics, LRV estimate, argmax tuple and theta.

    A constant series has an identically zero field; its variance estimate is
    floored and flagged instead of raising.
    """
    field = z_field(series, kernel, grid)
    t1 = ks_statistic(field)
    t2 = cv_statistic(field)
    if sigma2 is not None:
        est = LrvEstimate(float(sigma2), "fixed")
    elif np.ptp(series.values) == 0.0:
        est = LrvEstimate(EPS, lrv, {}, {"floored": True, "degenerate": True})
    else:
        est = estimate_lrv(projection(series, kernel), lrv, **(lrv_params or {}))
    t1n, t2n = normalize(t1, t2, est.sigma2)
    return t1, t2, float(t1n), float(t2n), est, locate_changes(field), field.theta_used


def detect(
    values: ArrayLike | Series,
    k: int = 2,
    kernel: KernelSpec = DIFFERENCE,
    lrv: LrvMethod = "ar1",
    lrv_params: dict[str, Any] | None = None,
    stride: int | None = None,
    table: QuantileTable | None = None,
    null: NullSamples | None = None,
    levels: Sequence[float] | None = None,
    sigma2: float | None = None,
    max_tuples: int = MAX_TUPLES,
) -> DetectionReport:
    """Compute the KS/CV statistics and compare them with null quantiles.

    Critical values come from ``table`` or, failing that, from ``null``
    (which also yields Monte Carlo p-values).
    """
    series = validate_series(values, min_length=max(4, k + 3))
    grid = PartitionGrid.auto(series.n, k, max_tuples) if stride is None else PartitionGrid(k, series.n, stride)
    t1, t2, t1n, t2n, est, where, theta = statistics(series, grid, kernel, lrv, lrv_params, sigma2)
    if table is None and null is not None:
        table = null.table(levels) if levels is not None else null.table()
    decisions: dict[float, dict[str, bool]] = {}
    crit: dict[float, dict[str, float]] = {}
    if table is not None:
        use = table.levels if levels is None else tuple(levels)
        for a in use:
            qks, qcv = table.critical(a)
            decisions[a] = {"ks": bool(t1n > qks), "cv": bool(t2n > qcv)}
            crit[a] = {"ks": qks, "cv": qcv}
    return DetectionReport(
        n=series.n,
        k=k,
        kernel=kernel.name or kernel.kind,
        stride=grid.stride,
        theta=theta,
        t1=t1,
        t2=t2,
        t1_normalized=t1n,
        t2_normalized=t2n,
        sigma2_hat=est.sigma2,
        lrv=est,
        argmax_tuple=where,
        decisions=decisions,
        critical_values=crit,
        pvalues=null.pvalues(t1n, t2n) if null is not None else None,
        null_meta=(table.meta if table is not None else None),
    )
