"""Limiting null and local-alternative distributions of the normalized statistics.

Two routes are provided:

* path simulation: draw a discretized Brownian bridge from normalized
  Gaussian partial sums, evaluate the bridge functional B on a grid and
  record ``max |B|`` (KS) and the grid average of ``B^2`` (CV);
* operator discretization: build the covariance kernel Gamma on the cells
  of the simplex, diagonalize it, and sample ``sum_j zeta_j chi2_j``.

Replication ``r`` of a run with master seed ``s`` draws from
``numpy.random.default_rng(SeedSequence(s, spawn_key=(r,)))``, so the
output does not depend on the number of worker threads.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Sequence

import numpy as np

from cpustat._kernels import scan_bridge
from cpustat.core import CpustatError, combinations_array

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

TABLE1_LEVELS: tuple[float, ...] = tuple(round(i / 100, 2) for i in range(1, 11))


class BadTuple(CpustatError):
    pass


class ResolutionTooLow(CpustatError):
    pass


class SpectrumMissing(CpustatError):
    pass


def replication_rng(seed: int, r: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))


# ---------------------------------------------------------------------------
# Bridge paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BridgePath:
    """Bridge values W0(i/m), i = 0..m."""

    m: int
    values: NDArray[np.float64]


def simulate_bridge(m: int, rng: np.random.Generator) -> BridgePath:
    """``S_m(i/m) - (i/m) S_m(1)`` with ``S_m`` the normalized Gaussian partial sum."""
    if m < 2:
        raise CpustatError(f"bridge resolution must be >= 2, got {m}")
    S = np.empty(m + 1)
    S[0] = 0.0
    np.cumsum(rng.standard_normal(m), out=S[1:])
    S /= math.sqrt(m)
    W = S - (np.arange(m + 1) / m) * S[m]
    W[0] = 0.0
    W[m] = 0.0
    return BridgePath(m, W)


def _extended(t: Sequence[float]) -> NDArray[np.float64]:
    return np.concatenate(([0.0], np.asarray(t, dtype=np.float64), [1.0]))


def _check_tuple(t: Sequence[float], k: int | None = None) -> NDArray[np.float64]:
    arr = np.asarray(t, dtype=np.float64).ravel()
    if k is not None and arr.shape[0] != k:
        raise BadTuple(f"expected {k} coordinates, got {arr.shape[0]}")
    e = _extended(arr)
    if arr.shape[0] == 0 or not np.all(np.diff(e) > 0):
        raise BadTuple(f"tuple must be strictly increasing inside (0, 1): {list(arr)}")
    return arr


def bridge_functional_B(path: BridgePath, t: Sequence[float]) -> float:
    """Evaluate B at ``t``, snapping each coordinate to floor(t m) / m."""
    arr = _check_tuple(t)
    m = path.m
    idx = np.concatenate(([0], np.floor(arr * m).astype(np.int64), [m]))
    s = idx / m
    w = path.values[idx]
    k = arr.shape[0]
    b = 0.0
    for l in range(1, k + 1):
        b += (s[l + 1] - s[l]) * (w[l] - w[l - 1]) - (s[l] - s[l - 1]) * (w[l + 1] - w[l])
    return float(b)


def drift_function(t: Sequence[float], A: Sequence[float]) -> float:
    """Local-alternative drift ``sum_l A_l (t_{l+1} - t_l)(t_l - t_{l-1})``."""
    e = _extended(t)
    return float(sum(a * (e[l + 1] - e[l]) * (e[l] - e[l - 1]) for l, a in enumerate(A, start=1)))


def null_lattice(m: int, stride: int = 1) -> NDArray[np.int64]:
    """Grid indices 1, 1+s, ... up to m-2; k-subsets give the tuples."""
    return np.arange(1, m - 1, stride, dtype=np.int64)


# ---------------------------------------------------------------------------
# Monte Carlo samples and quantile tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuantileTable:
    """Upper-tail quantiles of the limiting KS and CV distributions."""

    levels: tuple[float, ...]
    ks_q: tuple[float, ...]
    cv_q: tuple[float, ...]
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (len(self.levels) == len(self.ks_q) == len(self.cv_q)):
            raise CpustatError("levels and quantiles must have equal length")
        if list(self.levels) != sorted(self.levels) or any(not 0 < a < 1 for a in self.levels):
            raise CpustatError("levels must be sorted and inside (0, 1)")
        for q in (self.ks_q, self.cv_q):
            if any(v <= 0 for v in q):
                raise CpustatError("quantiles must be positive")
            if any(a < b for a, b in zip(q, q[1:])):
                raise CpustatError("upper quantiles must not increase with the level")

    def critical(self, level: float) -> tuple[float, float]:
        for a, ks, cv in zip(self.levels, self.ks_q, self.cv_q):
            if math.isclose(a, level, rel_tol=0, abs_tol=1e-12):
                return ks, cv
        raise KeyError(f"level {level} not in table {self.levels}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["level", "ks", "cv"])
        for row in zip(self.levels, self.ks_q, self.cv_q):
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "levels": list(self.levels),
            "ks": list(self.ks_q),
            "cv": list(self.cv_q),
            "meta": self.meta,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> QuantileTable:
        doc = json.loads(text)
        return cls(tuple(doc["levels"]), tuple(doc["ks"]), tuple(doc["cv"]), doc.get("meta", {}))

    @classmethod
    def from_csv(cls, text: str, meta: dict[str, Any] | None = None) -> QuantileTable:
        rows = list(csv.DictReader(io.StringIO(text)))
        rows.sort(key=lambda r: float(r["level"]))
        return cls(
            tuple(float(r["level"]) for r in rows),
            tuple(float(r["ks"]) for r in rows),
            tuple(float(r["cv"]) for r in rows),
            meta or {},
        )

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def grid_text(self) -> str:
        lines = [f"{'Level':>7} {'KS':>8} {'CV':>8}"]
        for a, ks, cv in zip(self.levels, self.ks_q, self.cv_q):
            lines.append(f"{a:>7.3f} {ks:>8.3f} {cv:>8.3f}")
        return "\n".join(lines)


@dataclass(frozen=True)
class NullSamples:
    """Raw Monte Carlo draws of the KS and CV functionals."""

    k: int
    m: int
    replications: int
    seed: int
    stride: int
    ks: NDArray[np.float64]
    cv: NDArray[np.float64]
    drift: tuple[float, ...] = ()

    @property
    def meta(self) -> dict[str, Any]:
        meta: dict[str, Any] = {
            "k": self.k,
            "m": self.m,
            "replications": self.replications,
            "seed": self.seed,
            "stride": self.stride,
        }
        if any(self.drift):
            meta["drift"] = list(self.drift)
        return meta

    def table(self, levels: Sequence[float] = TABLE1_LEVELS) -> QuantileTable:
        levels = tuple(sorted(float(a) for a in levels))
        probs = [1.0 - a for a in levels]
        ks_q = tuple(float(v) for v in np.quantile(self.ks, probs))
        cv_q = tuple(float(v) for v in np.quantile(self.cv, probs))
        return QuantileTable(levels, ks_q, cv_q, self.meta)

    def pvalues(self, t1n: float, t2n: float) -> dict[str, float]:
        """Monte Carlo p-values ``(1 + #{draws >= stat}) / (R + 1)``."""
        R = self.ks.shape[0]
        return {
            "ks": (1.0 + np.count_nonzero(self.ks >= t1n)) / (R + 1.0),
            "cv": (1.0 + np.count_nonzero(self.cv >= t2n)) / (R + 1.0),
        }


def chunk_ranges(total: int, parts: int) -> list[range]:
    parts = max(1, min(parts, total))
    edges = np.linspace(0, total, parts + 1).astype(int)
    return [range(a, b) for a, b in zip(edges[:-1], edges[1:])]


def simulate_statistics(
    k: int,
    m: int,
    replications: int,
    seed: int,
    stride: int = 1,
    drift: Sequence[float] | None = None,
    threads: int = 1,
) -> NullSamples:
    """Draw ``replications`` bridges and evaluate the KS and CV functionals.

    Tuples are the increasing k-subsets of ``{1, 1+s, ...} ∩ [1, m-2]``
    (for k = 2 and s = 1 this is ``1 <= i < j <= m-2``), and
    ``CV = s^k / m^k * sum B^2``. A nonzero ``drift`` adds the
    local-alternative mean ``sum_l A_l (t_{l+1}-t_l)(t_l-t_{l-1})``.
    """
    if k < 1:
        raise CpustatError(f"k must be >= 1, got {k}")
    if replications < 1:
        raise CpustatError("replications must be positive")
    lattice = null_lattice(m, stride)
    if lattice.shape[0] < k:
        raise ResolutionTooLow(f"m={m} with stride {stride} leaves fewer than k={k} grid points")
    A = np.zeros(k) if drift is None else np.asarray(drift, dtype=np.float64)
    if A.shape != (k,):
        raise CpustatError(f"drift needs {k} constants, got {A.shape}")
    ks = np.empty(replications)
    cv = np.empty(replications)
    weight = (stride / m) ** k

    def work(rows: range) -> None:
        for r in rows:
            path = simulate_bridge(m, replication_rng(seed, r))
            best, total = scan_bridge(path.values, m, lattice, k, A)
            ks[r] = best
            cv[r] = total * weight

    chunks = chunk_ranges(replications, threads)
    if len(chunks) == 1:
        work(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            list(pool.map(work, chunks))
    return NullSamples(k, m, replications, seed, stride, ks, cv, tuple(float(a) for a in A))


def simulate_null_quantiles(
    k: int,
    m: int,
    replications: int,
    levels: Sequence[float] = TABLE1_LEVELS,
    seed: int = 42,
    stride: int = 1,
    threads: int = 1,
) -> QuantileTable:
    if replications < 100:
        raise CpustatError(f"need at least 100 replications, got {replications}")
    return simulate_statistics(k, m, replications, seed, stride, threads=threads).table(levels)


def quantile_standard_error(samples: ArrayLike, level: float) -> float:
    """Distribution-free standard error of the upper ``level`` quantile.

    Half the spread between the quantiles one binomial standard error
    either side of ``1 - level``.
    """
    x = np.asarray(samples, dtype=np.float64)
    p = 1.0 - level
    d = math.sqrt(p * (1.0 - p) / x.shape[0])
    lo, hi = np.quantile(x, [max(p - d, 0.0), min(p + d, 1.0)])
    return float(hi - lo) / 2.0


# ---------------------------------------------------------------------------
# On-disk cache
# ---------------------------------------------------------------------------


def cache_key(k: int, m: int, replications: int, seed: int, stride: int) -> str:
    payload = json.dumps(
        {"k": k, "m": m, "replications": replications, "seed": seed, "stride": stride},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:20]


def cache_path(cache_dir: str | Path, k: int, m: int, replications: int, seed: int, stride: int) -> Path:
    return Path(cache_dir) / f"null-{cache_key(k, m, replications, seed, stride)}.npz"


def save_samples(samples: NullSamples, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp.npz")
    np.savez(
        tmp,
        ks=samples.ks,
        cv=samples.cv,
        meta=np.array(json.dumps(samples.meta, sort_keys=True)),
    )
    tmp.replace(path)


def load_samples(path: str | Path) -> NullSamples:
    with np.load(path) as data:
        meta = json.loads(str(data["meta"]))
        ks = np.array(data["ks"])
        cv = np.array(data["cv"])
    return NullSamples(
        meta["k"], meta["m"], meta["replications"], meta["seed"], meta["stride"], ks, cv,
        tuple(meta.get("drift", [0.0] * meta["k"])),
    )


def cached_samples(
    cache_dir: str | Path | None,
    k: int,
    m: int,
    replications: int,
    seed: int,
    stride: int = 1,
    threads: int = 1,
) -> NullSamples:
    """Load samples from ``cache_dir`` or simulate and store them."""
    if cache_dir is not None:
        path = cache_path(cache_dir, k, m, replications, seed, stride)
        if path.exists():
            return load_samples(path)
    samples = simulate_statistics(k, m, replications, seed, stride, threads=threads)
    if cache_dir is not None:
        save_samples(samples, path)
    return samples


# ---------------------------------------------------------------------------
# Covariance kernel
# ---------------------------------------------------------------------------


def _sigma_triple(sigma: float | Sequence[float]) -> tuple[float, float, float]:
    if np.ndim(sigma) == 0:
        s2 = float(sigma) ** 2
        return s2, -s2, s2
    s11, s12, s22 = (float(v) for v in sigma)
    return s11, s12, s22


def _inc(a: float, b: float, c: float, d: float) -> float:
    # Cov of increments [W(a) - W(b)] and [W(c) - W(d)] for unit Brownian motion
    return min(a, c) - min(a, d) - min(b, c) + min(b, d)


def _gamma_brownian(s: NDArray[np.float64], t: NDArray[np.float64], sig: tuple[float, float, float]) -> float:
    """Increment-by-increment covariance of the two-Brownian-motion limit."""
    s11, s12, s22 = sig
    k = s.shape[0]
    e = _extended(s)
    f = _extended(t)
    g = 0.0
    for l in range(1, k + 1):
        for j in range(1, k + 1):
            g += s11 * (f[l + 1] - f[l]) * (e[j + 1] - e[j]) * _inc(f[l], f[l - 1], e[j], e[j - 1])
            g += s12 * (f[l + 1] - f[l]) * (e[j] - e[j - 1]) * _inc(f[l], f[l - 1], e[j + 1], e[j])
            g += s12 * (f[l] - f[l - 1]) * (e[j + 1] - e[j]) * _inc(f[l + 1], f[l], e[j], e[j - 1])
            g += s22 * (f[l] - f[l - 1]) * (e[j] - e[j - 1]) * _inc(f[l + 1], f[l], e[j + 1], e[j])
    return g


def bridge_coefficients(t: Sequence[float]) -> NDArray[np.float64]:
    """Weights c_p with ``B(t) = sum_p c_p W0(t_p)`` over the points 0, t_1..t_k, 1."""
    e = _extended(t)
    k = e.shape[0] - 2
    c = np.zeros(k + 2)
    for l in range(1, k + 1):
        right = e[l + 1] - e[l]
        left = e[l] - e[l - 1]
        c[l] += right + left
        c[l - 1] -= right
        c[l + 1] -= left
    return c


def _gamma_bridge(s: NDArray[np.float64], t: NDArray[np.float64]) -> float:
    e, f = _extended(s), _extended(t)
    cs, ct = bridge_coefficients(s), bridge_coefficients(t)
    K = np.minimum.outer(e, f) - np.multiply.outer(e, f)
    return float(cs @ K @ ct)


def _in_simplex(t: NDArray[np.float64]) -> bool:
    return bool(np.all(np.diff(_extended(t)) > 0))


def gamma_covariance(
    s: Sequence[float],
    t: Sequence[float],
    k: int | None = None,
    sigma: float | Sequence[float] = 1.0,
    route: str = "brownian",
) -> float:
    """Covariance kernel Gamma(s, t) of the limiting process.

    ``sigma`` is either a scalar (antisymmetric case, ``s11 = s22 = sigma^2``,
    ``s12 = -sigma^2``) or the triple ``(s11, s12, s22)``.

    ``route="brownian"`` expands both processes into Brownian increments with
    ``Cov(W_p(a), W_r(b)) = min(a, b) s_pr``. ``route="bridge"`` expands the
    bridge representation with ``Cov(W0(a), W0(b)) = min(a, b) - ab`` and
    requires the antisymmetric pattern. Returns 0 outside the open simplex.
    """
    s_arr = np.asarray(s, dtype=np.float64).ravel()
    t_arr = np.asarray(t, dtype=np.float64).ravel()
    if k is None:
        k = s_arr.shape[0]
    if s_arr.shape[0] != k or t_arr.shape[0] != k:
        raise BadTuple(f"both tuples need {k} coordinates")
    if not (_in_simplex(s_arr) and _in_simplex(t_arr)):
        return 0.0
    sig = _sigma_triple(sigma)
    if route == "brownian":
        return _gamma_brownian(s_arr, t_arr, sig)
    if route == "bridge":
        s11, s12, s22 = sig
        if not (math.isclose(s11, s22) and math.isclose(s12, -s11)):
            raise CpustatError("bridge route needs s11 = s22 = -s12")
        return s11 * _gamma_bridge(s_arr, t_arr)
    raise CpustatError(f"unknown route {route!r}")


def _point_coefficients(points: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Vectorized W1/W2 coefficients for rows of ``points`` (N x k)."""
    N, k = points.shape
    e = np.empty((N, k + 2))
    e[:, 0] = 0.0
    e[:, 1:-1] = points
    e[:, -1] = 1.0
    u = np.zeros((N, k + 2))
    v = np.zeros((N, k + 2))
    for l in range(1, k + 1):
        right = e[:, l + 1] - e[:, l]
        left = e[:, l] - e[:, l - 1]
        u[:, l] += right
        u[:, l - 1] -= right
        v[:, l + 1] += left
        v[:, l] -= left
    return e, u, v


def gamma_matrix(points: ArrayLike, sigma: float | Sequence[float] = 1.0) -> NDArray[np.float64]:
    """Gamma evaluated on all pairs of rows of ``points`` (assumed inside the simplex)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    s11, s12, s22 = _sigma_triple(sigma)
    e, u, v = _point_coefficients(pts)
    kk = e.shape[1]
    G = np.zeros((pts.shape[0], pts.shape[0]))
    for p in range(kk):
        for q in range(kk):
            mn = np.minimum.outer(e[:, p], e[:, q])
            if not mn.any():
                continue
            coef = (
                s11 * np.multiply.outer(u[:, p], u[:, q])
                + s12 * np.multiply.outer(u[:, p], v[:, q])
                + s12 * np.multiply.outer(v[:, p], u[:, q])
                + s22 * np.multiply.outer(v[:, p], v[:, q])
            )
            G += coef * mn
    return 0.5 * (G + G.T)


# ---------------------------------------------------------------------------
# Operator spectrum and weighted chi-square sums
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OperatorSpectrum:
    """Nystrom eigenpairs of the covariance operator on the simplex cells.

    ``eigenfunctions[:, j]`` holds g_j at ``points`` normalized so that
    ``sum g_j^2 * cell_volume = 1``.
    """

    k: int
    grid_resolution: int
    points: NDArray[np.float64]
    cell_volume: float
    eigenvalues: NDArray[np.float64]
    eigenfunctions: NDArray[np.float64]
    weighted_trace: float

    def positive(self, rel_tol: float = 1e-10) -> NDArray[np.bool_]:
        return self.eigenvalues >= rel_tol * self.eigenvalues[0]


def simplex_cells(k: int, grid_resolution: int) -> NDArray[np.float64]:
    """Midpoints of grid cells whose centers are strictly increasing."""
    mids = (np.arange(grid_resolution) + 0.5) / grid_resolution
    idx = combinations_array(np.arange(grid_resolution), k)
    return mids[idx]


def operator_spectrum(
    k: int,
    grid_resolution: int,
    sigma: float | Sequence[float] = 1.0,
    max_cells: int = 6000,
) -> OperatorSpectrum:
    if grid_resolution < 10:
        raise ResolutionTooLow(f"need at least 10 cells per axis, got {grid_resolution}")
    if math.comb(grid_resolution, k) > max_cells:
        raise ResolutionTooLow(
            f"{math.comb(grid_resolution, k)} cells exceed max_cells={max_cells}; lower the resolution"
        )
    points = simplex_cells(k, grid_resolution)
    vol = grid_resolution ** -float(k)
    G = gamma_matrix(points, sigma)
    evals, evecs = np.linalg.eigh(G * vol)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order] / math.sqrt(vol)
    trace = float(np.trace(G)) * vol
    return OperatorSpectrum(k, grid_resolution, points, vol, evals, evecs, trace)


def weighted_chi2_samples(
    eigenvalues: ArrayLike,
    draws: int = 100_000,
    seed: int = 0,
    shifts: ArrayLike | None = None,
    chunk: int = 5000,
) -> NDArray[np.float64]:
    """Draws of ``sum_j (sqrt(zeta_j) Z_j + rho_j)^2``.

    With ``shifts=None`` this is ``sum_j zeta_j chi2_j``; shifts rho_j give
    noncentral terms with noncentrality ``rho_j^2 / zeta_j``.
    """
    z = np.clip(np.asarray(eigenvalues, dtype=np.float64), 0.0, None)
    root = np.sqrt(z)
    rho = np.zeros_like(z) if shifts is None else np.asarray(shifts, dtype=np.float64)
    rng = np.random.default_rng(seed)
    out = np.empty(draws)
    for start in range(0, draws, chunk):
        stop = min(start + chunk, draws)
        g = rng.standard_normal((stop - start, z.shape[0])) * root + rho
        out[start:stop] = np.einsum("ij,ij->i", g, g)
    return out


def local_alternative_shift(
    k: int,
    A: Sequence[float],
    spectrum: OperatorSpectrum | None,
    rel_tol: float = 1e-10,
) -> list[tuple[float, float]]:
    """``(zeta_j, rho_j^2 / zeta_j)`` pairs for drift constants ``A``.

    ``rho_j`` integrates the drift against g_j over the simplex cells.
    Eigenvalues below ``rel_tol * zeta_1`` are dropped.
    """
    zeta, rho = noncentrality(k, A, spectrum, rel_tol)
    return [(float(z), float(r * r / z)) for z, r in zip(zeta, rho)]


def noncentrality(
    k: int,
    A: Sequence[float],
    spectrum: OperatorSpectrum | None,
    rel_tol: float = 1e-10,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Kept eigenvalues and the matching rho_j."""
    if spectrum is None:
        raise SpectrumMissing("compute operator_spectrum first")
    A_arr = np.asarray(A, dtype=np.float64)
    if spectrum.k != k or A_arr.shape != (k,):
        raise CpustatError(f"need k={spectrum.k} drift constants, got {A_arr.shape}")
    if not np.all(np.isfinite(A_arr)):
        raise CpustatError("drift constants must be finite")
    d = _drift_on_cells(spectrum, A_arr)
    keep = spectrum.positive(rel_tol)
    rho = (spectrum.eigenfunctions[:, keep].T @ d) * spectrum.cell_volume
    return spectrum.eigenvalues[keep], rho


def _drift_on_cells(spectrum: OperatorSpectrum, A: NDArray[np.float64]) -> NDArray[np.float64]:
    pts = spectrum.points
    e = np.column_stack([np.zeros(pts.shape[0]), pts, np.ones(pts.shape[0])])
    d = np.zeros(pts.shape[0])
    for l in range(1, spectrum.k + 1):
        d += A[l - 1] * (e[:, l + 1] - e[:, l]) * (e[:, l] - e[:, l - 1])
    return d


def drift_residual(
    k: int,
    A: Sequence[float],
    spectrum: OperatorSpectrum | None,
    rel_tol: float = 1e-10,
) -> float:
    """Energy of the drift outside the span of the kept eigenfunctions.

    The operator has low rank, so a generic drift is not spanned by the
    g_j. Since the limit process lives in that span, the integral of
    ``(Z + d)^2`` equals ``sum_j (G_j + rho_j)^2`` plus this constant.
    """
    zeta, rho = noncentrality(k, A, spectrum, rel_tol)
    assert spectrum is not None
    d = _drift_on_cells(spectrum, np.asarray(A, dtype=np.float64))
    total = float(np.dot(d, d)) * spectrum.cell_volume
    return max(total - float(np.dot(rho, rho)), 0.0)


def mean_shift_constants(gammas: Sequence[float], mean_dh_du: float = -1.0) -> tuple[float, ...]:
    """``A_l = -gamma_l * E[dh/du]`` for location shifts; the default is h(x, y) = x - y."""
    return tuple(-float(g) * mean_dh_du for g in gammas)
