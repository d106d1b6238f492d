"""Shared domain types: series, kernels, partition grids and reports.

Indices in grids and reports are 1-based, so a change-point tuple
``(m_1, ..., m_k)`` satisfies ``1 < m_1 < ... < m_k < n`` with the
conventions ``m_0 = 1`` and ``m_{k+1} = n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Any, Callable, Iterator, Literal

import numpy as np

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from cpustat.lrv import LrvEstimate

MAX_TUPLES = 2_000_000


class CpustatError(ValueError):
    """Base class for input and contract violations."""


class NonFinite(CpustatError):
    def __init__(self, index: int) -> None:
        super().__init__(f"non-finite value at index {index}")
        self.index = index


class TooShort(CpustatError):
    def __init__(self, n: int, required: int = 4) -> None:
        super().__init__(f"series too short: n={n}, need at least {required}")
        self.n = n
        self.required = required


class GridMismatch(CpustatError):
    pass


class WrongKernel(CpustatError):
    pass


class EmptyGrid(CpustatError):
    pass


class NonPositiveVariance(CpustatError):
    pass


# ---------------------------------------------------------------------------
# Series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Series:
    """A validated univariate sample X_1..X_n (read-only float array)."""

    values: NDArray[np.float64]

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def __len__(self) -> int:
        return self.n


def validate_series(raw: ArrayLike | Series, min_length: int = 4) -> Series:
    """Check finiteness and length and wrap ``raw`` as a :class:`Series`.

    Raises
    ------
    NonFinite
        If any value is NaN or infinite (reports the first 0-based index).
    TooShort
        If fewer than ``min_length`` values are given.
    """
    if isinstance(raw, Series):
        raw = raw.values
    values = np.array(raw, dtype=np.float64).ravel()
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NonFinite(int(bad[0]))
    if values.shape[0] < min_length:
        raise TooShort(int(values.shape[0]), min_length)
    values.setflags(write=False)
    return Series(values)


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

KernelKind = Literal["difference", "indicator_less", "user"]


def _difference(x: Any, y: Any) -> Any:
    return x - y


def _indicator_less(x: Any, y: Any) -> Any:
    return np.less(x, y).astype(np.float64)


@dataclass(frozen=True)
class KernelSpec:
    """A bivariate kernel h(x, y) with the traits the detectors rely on.

    Attributes
    ----------
    kind : {"difference", "indicator_less", "user"}
    evaluate : callable
        ``evaluate(x, y) -> float``. When ``vectorized`` is set it must also
        broadcast over numpy arrays.
    antisymmetric : bool
        Declares h(x, y) = -h(y, x).
    theta_null : float or None
        Known value of theta_h(F, F) under the null, used for centering.
        ``None`` means the plug-in estimate is used instead.
    vectorized : bool
    name : str
    """

    kind: KernelKind
    evaluate: Callable[[Any, Any], Any]
    antisymmetric: bool = False
    theta_null: float | None = None
    vectorized: bool = False
    name: str = ""

    def __call__(self, x: Any, y: Any) -> Any:
        return self.evaluate(x, y)

    def matrix(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        """Return the n x n matrix ``H[i, j] = h(x_i, x_j)``."""
        x = np.asarray(x, dtype=np.float64)
        if self.vectorized:
            return np.asarray(self.evaluate(x[:, None], x[None, :]), dtype=np.float64)
        n = x.shape[0]
        out = np.empty((n, n))
        for i in range(n):
            xi = x[i]
            for j in range(n):
                out[i, j] = self.evaluate(xi, x[j])
        return out


DIFFERENCE = KernelSpec(
    kind="difference",
    evaluate=_difference,
    antisymmetric=True,
    theta_null=0.0,
    vectorized=True,
    name="difference",
)

# Ties count as 0 (strict inequality); this biases theta slightly below 1/2
# on tied data and is left uncorrected.
INDICATOR_LESS = KernelSpec(
    kind="indicator_less",
    evaluate=_indicator_less,
    antisymmetric=False,
    theta_null=0.5,
    vectorized=True,
    name="indicator_less",
)


def user_kernel(
    func: Callable[[Any, Any], Any],
    *,
    antisymmetric: bool = False,
    vectorized: bool = False,
    name: str = "user",
) -> KernelSpec:
    """Wrap an arbitrary kernel. It carries no known null centering."""
    return KernelSpec(
        kind="user",
        evaluate=func,
        antisymmetric=antisymmetric,
        theta_null=None,
        vectorized=vectorized,
        name=name,
    )


def kernel_from_tag(tag: str) -> KernelSpec:
    tags = {
        "difference": DIFFERENCE,
        "diff": DIFFERENCE,
        "indicator": INDICATOR_LESS,
        "indicator_less": INDICATOR_LESS,
        "indicator-less": INDICATOR_LESS,
    }
    try:
        return tags[tag.lower()]
    except KeyError:
        raise CpustatError(f"unknown kernel tag {tag!r}") from None


def check_antisymmetry(
    kernel: KernelSpec,
    n_probes: int = 1000,
    rng: np.random.Generator | None = None,
    atol: float = 1e-12,
) -> bool:
    """Probe ``h(x, y) == -h(y, x)`` on random pairs."""
    rng = np.random.default_rng(0) if rng is None else rng
    xs = rng.normal(scale=3.0, size=n_probes)
    ys = rng.normal(scale=3.0, size=n_probes)
    for x, y in zip(xs, ys):
        if abs(float(kernel(x, y)) + float(kernel(y, x))) > atol:
            return False
    return True


# ---------------------------------------------------------------------------
# Partition grids
# ---------------------------------------------------------------------------


def combinations_array(values: NDArray[np.int64], k: int) -> NDArray[np.int64]:
    """All increasing k-subsets of sorted ``values``, lexicographic, as rows."""
    values = np.asarray(values, dtype=np.int64)
    L = values.shape[0]
    if k < 1 or L < k:
        return np.empty((0, max(k, 0)), dtype=np.int64)
    # positions into ``values``; the last column may go up to L-1
    pos = np.arange(L - k + 1, dtype=np.int64)[:, None]
    for col in range(1, k):
        upper = L - k + col  # max position allowed in this column
        last = pos[:, -1]
        counts = upper - last
        rows = np.repeat(np.arange(pos.shape[0]), counts)
        starts = np.repeat(last + 1, counts)
        offsets = np.arange(rows.shape[0]) - np.repeat(np.cumsum(counts) - counts, counts)
        pos = np.column_stack([pos[rows], starts + offsets])
    return values[pos]


def _lattice(n: int, stride: int) -> NDArray[np.int64]:
    return np.arange(1 + stride, n, stride, dtype=np.int64)


def grid_count(n: int, k: int, stride: int = 1) -> int:
    return math.comb(len(range(1 + stride, n, stride)), k)


def default_stride(n: int, k: int, max_tuples: int = MAX_TUPLES) -> int:
    """Smallest stride whose grid has at most ``max_tuples`` tuples."""
    s = 1
    while grid_count(n, k, s) > max_tuples:
        s += 1
    return s


@dataclass(frozen=True)
class PartitionGrid:
    """Admissible change-point tuples ``1 < m_1 < ... < m_k < n``.

    With ``stride = s > 1`` each m_l is restricted to ``{1+s, 1+2s, ...}``.
    """

    k: int
    n: int
    stride: int = 1

    def __post_init__(self) -> None:
        if self.k < 1:
            raise CpustatError(f"k must be >= 1, got {self.k}")
        if self.stride < 1:
            raise CpustatError(f"stride must be >= 1, got {self.stride}")
        if self.n < self.k + 3:
            raise TooShort(self.n, self.k + 3)

    @classmethod
    def auto(cls, n: int, k: int, max_tuples: int = MAX_TUPLES) -> PartitionGrid:
        return cls(k=k, n=n, stride=default_stride(n, k, max_tuples))

    @property
    def count(self) -> int:
        return grid_count(self.n, self.k, self.stride)

    @cached_property
    def tuples(self) -> NDArray[np.int64]:
        """Array of shape (count, k) with 1-based indices, in lexicographic order."""
        arr = combinations_array(_lattice(self.n, self.stride), self.k)
        arr.setflags(write=False)
        return arr

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        for row in self.tuples:
            yield tuple(int(v) for v in row)

    def __len__(self) -> int:
        return self.count


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class DetectionReport:
    """Outcome of a k-change-point test on one series."""

    n: int
    k: int
    kernel: str
    stride: int
    theta: float
    t1: float
    t2: float
    t1_normalized: float
    t2_normalized: float
    sigma2_hat: float
    lrv: LrvEstimate
    argmax_tuple: tuple[int, ...]
    decisions: dict[float, dict[str, bool]] = field(default_factory=dict)
    critical_values: dict[float, dict[str, float]] = field(default_factory=dict)
    pvalues: dict[str, float] | None = None
    null_meta: dict[str, Any] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "k": self.k,
            "kernel": self.kernel,
            "stride": self.stride,
            "theta": self.theta,
            "t1": self.t1,
            "t2": self.t2,
            "t1_normalized": self.t1_normalized,
            "t2_normalized": self.t2_normalized,
            "sigma2_hat": self.sigma2_hat,
            "lrv": self.lrv.to_dict(),
            "argmax_tuple": list(self.argmax_tuple),
            "decisions": {
                f"{lvl:g}": dict(d) for lvl, d in sorted(self.decisions.items())
            },
            "critical_values": {
                f"{lvl:g}": dict(d) for lvl, d in sorted(self.critical_values.items())
            },
            "pvalues": self.pvalues,
            "null_meta": self.null_meta,
        }

    def summary(self) -> str:
        lines = [
            f"n = {self.n}, k = {self.k}, kernel = {self.kernel}, stride = {self.stride}",
            f"T1 (KS)            = {self.t1:.6f}",
            f"T2 (CV)            = {self.t2:.6f}",
            f"sigma2_hat [{self.lrv.method}] = {self.sigma2_hat:.6f}",
            f"T1 normalized      = {self.t1_normalized:.6f}",
            f"T2 normalized      = {self.t2_normalized:.6f}",
            f"estimated changes  = {list(self.argmax_tuple)}",
        ]
        if self.pvalues is not None:
            lines.append(
                f"p-values           = KS {self.pvalues['ks']:.4f}, CV {self.pvalues['cv']:.4f}"
            )
        if self.decisions:
            lines.append(f"{'level':>8} {'KS crit':>9} {'KS':>7} {'CV crit':>9} {'CV':>7}")
            for lvl in sorted(self.decisions):
                d = self.decisions[lvl]
                c = self.critical_values.get(lvl, {})
                lines.append(
                    f"{lvl:>8.3f} {c.get('ks', float('nan')):>9.4f} "
                    f"{'reject' if d['ks'] else 'accept':>7} "
                    f"{c.get('cv', float('nan')):>9.4f} "
                    f"{'reject' if d['cv'] else 'accept':>7}"
                )
        return "\n".join(lines)
