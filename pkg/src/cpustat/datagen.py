"""Piecewise AR(1) series with known change locations.

Each segment follows ``X_j = mu + rho X_{j-1} + omega eps_j`` with standard
Gaussian innovations drawn from one stream in index order. The first
segment starts at 0 and discards ``burn_in`` warm-up values; later segments
continue the recursion from the last emitted value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal

import numpy as np

from cpustat.core import CpustatError, Series, validate_series

if TYPE_CHECKING:
    from numpy.typing import NDArray


class BadSpec(CpustatError):
    pass


class UnknownTag(CpustatError):
    pass


@dataclass(frozen=True)
class SegmentSpec:
    mu: float
    rho: float
    omega: float
    length: int
    burn_in: int = 0

    def __post_init__(self) -> None:
        if not abs(self.rho) < 1:
            raise BadSpec(f"|rho| must be < 1, got {self.rho}")
        if self.omega < 0:
            raise BadSpec(f"omega must be >= 0, got {self.omega}")
        if self.length < 1 or self.burn_in < 0:
            raise BadSpec("length must be >= 1 and burn_in >= 0")


ScenarioTag = Literal["mean-mean", "mean-mean-ar", "mean-autocorr", "mean-variance"]
SCENARIO_TAGS: tuple[str, ...] = ("mean-mean", "mean-mean-ar", "mean-autocorr", "mean-variance")

DEFAULT_N = 200
SEGMENT_LENGTHS = (75, 75, 50)
BURN_IN = 25


@dataclass(frozen=True)
class ScenarioSpec:
    """One of the four two-change designs on n = 200.

    ``mean-mean``      mu2, mu3 with rho = 0, omega = 1
    ``mean-mean-ar``   mu2, mu3 with rho = 0.2 (``rho``), omega = 1
    ``mean-autocorr``  mu2 = mu3, rho1 = rho2 = 0, rho3
    ``mean-variance``  mu2 = mu3, omega1 = omega2 = 1, omega3
    """

    tag: str
    mu2: float = 0.0
    mu3: float = 0.0
    rho: float = 0.0
    rho3: float = 0.0
    omega3: float = 1.0

    @classmethod
    def mean_mean(cls, mu2: float, mu3: float) -> ScenarioSpec:
        return cls("mean-mean", mu2=mu2, mu3=mu3)

    @classmethod
    def mean_mean_ar(cls, mu2: float, mu3: float, rho: float = 0.2) -> ScenarioSpec:
        return cls("mean-mean-ar", mu2=mu2, mu3=mu3, rho=rho)

    @classmethod
    def mean_autocorr(cls, mu2: float, rho3: float) -> ScenarioSpec:
        return cls("mean-autocorr", mu2=mu2, mu3=mu2, rho3=rho3)

    @classmethod
    def mean_variance(cls, mu2: float, omega3: float) -> ScenarioSpec:
        return cls("mean-variance", mu2=mu2, mu3=mu2, omega3=omega3)

    @property
    def true_changes(self) -> tuple[int, int]:
        a, b, _ = SEGMENT_LENGTHS
        return (a, a + b)

    @property
    def change_fractions(self) -> tuple[float, float]:
        c1, c2 = self.true_changes
        return (c1 / DEFAULT_N, c2 / DEFAULT_N)

    @property
    def label(self) -> str:
        if self.tag in ("mean-mean", "mean-mean-ar"):
            return f"({self.mu2:.2f},{self.mu3:.2f})"
        if self.tag == "mean-autocorr":
            return f"({self.mu2:.1f},{self.rho3:.1f})"
        return f"({self.mu2:.1f},{self.omega3:.1f})"


def build_scenario(spec: ScenarioSpec) -> list[SegmentSpec]:
    """Three segments of lengths 75, 75, 50 (changes after 75 and 150)."""
    n1, n2, n3 = SEGMENT_LENGTHS
    if spec.tag == "mean-mean":
        params = [(0.0, 0.0, 1.0), (spec.mu2, 0.0, 1.0), (spec.mu3, 0.0, 1.0)]
    elif spec.tag == "mean-mean-ar":
        r = spec.rho
        params = [(0.0, r, 1.0), (spec.mu2, r, 1.0), (spec.mu3, r, 1.0)]
    elif spec.tag == "mean-autocorr":
        params = [(0.0, 0.0, 1.0), (spec.mu2, 0.0, 1.0), (spec.mu2, spec.rho3, 1.0)]
    elif spec.tag == "mean-variance":
        params = [(0.0, 0.0, 1.0), (spec.mu2, 0.0, 1.0), (spec.mu2, 0.0, spec.omega3)]
    else:
        raise UnknownTag(f"unknown scenario {spec.tag!r}; expected one of {SCENARIO_TAGS}")
    lengths = (n1, n2, n3)
    burns = (BURN_IN, 0, 0)
    return [SegmentSpec(mu, rho, om, ln, b) for (mu, rho, om), ln, b in zip(params, lengths, burns)]


def null_segments(mu: float, rho: float, omega: float, n: int = DEFAULT_N) -> list[SegmentSpec]:
    """Single homogeneous AR(1) segment for level experiments."""
    return [SegmentSpec(mu, rho, omega, n, BURN_IN)]


def simulate_piecewise(
    segments: list[SegmentSpec], rng: np.random.Generator
) -> tuple[Series, tuple[int, ...]]:
    """Concatenate the segments; return the series and the change indices.

    Change indices are the cumulative segment lengths (1-based index of the
    last value of each segment except the final one).
    """
    if not segments:
        raise BadSpec("need at least one segment")
    total = sum(s.burn_in + s.length for s in segments)
    eps = rng.standard_normal(total)
    out = np.empty(sum(s.length for s in segments))
    x = 0.0
    e = 0
    o = 0
    for seg in segments:
        mu, rho, om = seg.mu, seg.rho, seg.omega
        for _ in range(seg.burn_in):
            x = mu + rho * x + om * eps[e]
            e += 1
        for _ in range(seg.length):
            x = mu + rho * x + om * eps[e]
            e += 1
            out[o] = x
            o += 1
    changes = tuple(int(v) for v in np.cumsum([s.length for s in segments])[:-1])
    return validate_series(out), changes


def innovations(segments: list[SegmentSpec], rng: np.random.Generator) -> NDArray[np.float64]:
    """The raw innovation stream a call to :func:`simulate_piecewise` would consume."""
    return rng.standard_normal(sum(s.burn_in + s.length for s in segments))
