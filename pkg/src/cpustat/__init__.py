"""Tests for k change-points in a time series based on U-statistics.

The KS and CV statistics are built from the field ``Z_n`` of partial
U-statistic sums over ordered partitions, normalized by a long-run
variance estimate and compared with quantiles of Brownian-bridge
functionals obtained by simulation.
"""

from __future__ import annotations

from cpustat.core import (
    DIFFERENCE,
    INDICATOR_LESS,
    CpustatError,
    DetectionReport,
    KernelSpec,
    NonPositiveVariance,
    PartitionGrid,
    Series,
    kernel_from_tag,
    user_kernel,
    validate_series,
)
from cpustat.datagen import ScenarioSpec, SegmentSpec, build_scenario, simulate_piecewise
from cpustat.detect import detect
from cpustat.experiments import empirical_level, empirical_power
from cpustat.lrv import LrvEstimate, estimate_lrv, sigma2_ar1_plugin
from cpustat.nulldist import (
    QuantileTable,
    gamma_covariance,
    operator_spectrum,
    simulate_bridge,
    simulate_null_quantiles,
)
from cpustat.ustat import cv_statistic, fast_bilinear, ks_statistic, z_field

__all__ = [
    "DIFFERENCE",
    "INDICATOR_LESS",
    "CpustatError",
    "DetectionReport",
    "KernelSpec",
    "LrvEstimate",
    "NonPositiveVariance",
    "PartitionGrid",
    "QuantileTable",
    "ScenarioSpec",
    "SegmentSpec",
    "Series",
    "build_scenario",
    "cv_statistic",
    "detect",
    "empirical_level",
    "empirical_power",
    "estimate_lrv",
    "fast_bilinear",
    "gamma_covariance",
    "kernel_from_tag",
    "ks_statistic",
    "operator_spectrum",
    "sigma2_ar1_plugin",
    "simulate_bridge",
    "simulate_null_quantiles",
    "simulate_piecewise",
    "user_kernel",
    "validate_series",
    "z_field",
]

__version__ = "0.1.0"
