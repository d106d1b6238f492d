"""Empirical level and power of the KS/CV tests by Monte Carlo.

Every replication draws its series from its own generator derived from the
master seed (see :func:`cpustat.nulldist.replication_rng`), so rejection
indicators are identical whatever the number of worker threads.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from cpustat.core import DIFFERENCE, PartitionGrid
from cpustat.datagen import (
    DEFAULT_N,
    ScenarioSpec,
    SegmentSpec,
    build_scenario,
    null_segments,
    simulate_piecewise,
)
from cpustat.detect import statistics
from cpustat.nulldist import QuantileTable, chunk_ranges, replication_rng

K = 2


@dataclass
class ExperimentResult:
    label: str
    replications: int
    seed: int
    levels: tuple[float, ...]
    t1n: np.ndarray
    t2n: np.ndarray
    critical: dict[float, tuple[float, float]]
    scenario: ScenarioSpec | None = None
    null_model: tuple[float, float, float] | None = None
    n: int = DEFAULT_N
    runtime: float = 0.0
    table_digest: str = ""
    extra: dict[str, Any] = field(default_factory=dict)

    def rejections(self, level: float, stat: str) -> np.ndarray:
        qks, qcv = self.critical[level]
        return self.t1n > qks if stat == "ks" else self.t2n > qcv

    def rate(self, level: float, stat: str) -> float:
        return float(np.mean(self.rejections(level, stat)))

    def se(self, level: float, stat: str) -> float:
        p = self.rate(level, stat)
        return math.sqrt(p * (1.0 - p) / self.replications)

    @property
    def rejection_rate(self) -> dict[str, dict[float, float]]:
        return {s: {a: self.rate(a, s) for a in self.levels} for s in ("ks", "cv")}

    def to_dict(self, samples: bool = False) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "label": self.label,
            "kind": "level" if self.null_model is not None else "power",
            "scenario": self.scenario.tag if self.scenario is not None else None,
            "null_model": list(self.null_model) if self.null_model is not None else None,
            "n": self.n,
            "replications": self.replications,
            "seed": self.seed,
            "table_digest": self.table_digest,
            "rates": {
                f"{a:g}": {
                    "ks": self.rate(a, "ks"),
                    "ks_se": self.se(a, "ks"),
                    "cv": self.rate(a, "cv"),
                    "cv_se": self.se(a, "cv"),
                }
                for a in self.levels
            },
            "mean_t1n": float(np.mean(self.t1n)),
            "mean_t2n": float(np.mean(self.t2n)),
        }
        if samples:
            doc["levels"] = list(self.levels)
            doc["critical"] = [[a, *self.critical[a]] for a in self.levels]
            doc["t1n"] = self.t1n.tolist()
            doc["t2n"] = self.t2n.tolist()
            if self.scenario is not None:
                doc["scenario_spec"] = asdict(self.scenario)
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> ExperimentResult:
        """Rebuild a result saved with ``to_dict(samples=True)``."""
        spec = doc.get("scenario_spec")
        return cls(
            label=doc["label"],
            replications=doc["replications"],
            seed=doc["seed"],
            levels=tuple(doc["levels"]),
            t1n=np.asarray(doc["t1n"], dtype=np.float64),
            t2n=np.asarray(doc["t2n"], dtype=np.float64),
            critical={row[0]: (row[1], row[2]) for row in doc["critical"]},
            scenario=ScenarioSpec(**spec) if spec else None,
            null_model=tuple(doc["null_model"]) if doc.get("null_model") else None,
            n=doc["n"],
            table_digest=doc.get("table_digest", ""),
        )


def _run(
    segments: list[SegmentSpec],
    replications: int,
    seed: int,
    threads: int,
) -> tuple[np.ndarray, np.ndarray, int]:
    n = sum(s.length for s in segments)
    grid = PartitionGrid(K, n, 1)
    _ = grid.tuples  # build once before the workers share it
    t1n = np.empty(replications)
    t2n = np.empty(replications)

    def work(rows: range) -> None:
        for r in rows:
            series, _changes = simulate_piecewise(segments, replication_rng(seed, r))
            _, _, a, b, _, _, _ = statistics(series, grid, DIFFERENCE, "ar1")
            t1n[r] = a
            t2n[r] = b

    chunks = chunk_ranges(replications, threads)
    if len(chunks) == 1:
        work(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            list(pool.map(work, chunks))
    return t1n, t2n, n


def _critical(quantiles: QuantileTable, levels: Sequence[float] | None) -> tuple[tuple[float, ...], dict[float, tuple[float, float]]]:
    if quantiles.meta.get("k", K) != K:
        raise ValueError(f"quantile table is for k={quantiles.meta['k']}, experiments use k={K}")
    use = tuple(quantiles.levels if levels is None else levels)
    return use, {a: quantiles.critical(a) for a in use}


def empirical_level(
    null_model: tuple[float, float, float],
    n: int,
    replications: int,
    quantiles: QuantileTable,
    seed: int = 0,
    levels: Sequence[float] | None = None,
    threads: int = 1,
) -> ExperimentResult:
    """Rejection rates on homogeneous AR(1) series ``(mu, rho, omega)``."""
    mu, rho, omega = (float(v) for v in null_model)
    use, crit = _critical(quantiles, levels)
    start = time.perf_counter()
    t1n, t2n, n = _run(null_segments(mu, rho, omega, n), replications, seed, threads)
    return ExperimentResult(
        label=f"({mu:g},{rho:g},{omega:g})",
        replications=replications,
        seed=seed,
        levels=use,
        t1n=t1n,
        t2n=t2n,
        critical=crit,
        null_model=(mu, rho, omega),
        n=n,
        runtime=time.perf_counter() - start,
        table_digest=quantiles.digest(),
    )


def empirical_power(
    scenario: ScenarioSpec,
    replications: int,
    quantiles: QuantileTable,
    seed: int = 0,
    levels: Sequence[float] | None = (0.05,),
    threads: int = 1,
) -> ExperimentResult:
    """Rejection rates on series from one of the two-change scenarios."""
    use, crit = _critical(quantiles, levels)
    start = time.perf_counter()
    t1n, t2n, n = _run(build_scenario(scenario), replications, seed, threads)
    return ExperimentResult(
        label=scenario.label,
        replications=replications,
        seed=seed,
        levels=use,
        t1n=t1n,
        t2n=t2n,
        critical=crit,
        scenario=scenario,
        n=n,
        runtime=time.perf_counter() - start,
        table_digest=quantiles.digest(),
    )


TABLE_COLUMNS = ("model", "reps", "KS", "KS_se", "CV", "CV_se")


def emit_table(results: Sequence[ExperimentResult], fmt: str = "csv", level: float = 0.05) -> str:
    """Rows of (model, reps, KS rate, SE, CV rate, SE) as CSV or Markdown."""
    rows = [
        (
            r.label,
            str(r.replications),
            repr(r.rate(level, "ks")),
            repr(r.se(level, "ks")),
            repr(r.rate(level, "cv")),
            repr(r.se(level, "cv")),
        )
        for r in results
    ]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        writer.writerows(rows)
        return buf.getvalue()
    if fmt in ("markdown", "md"):
        lines = [
            "| " + " | ".join(TABLE_COLUMNS) + " |",
            "|" + "|".join("---" for _ in TABLE_COLUMNS) + "|",
        ]
        for r in results:
            lines.append(
                f"| {r.label} | {r.replications} | {r.rate(level, 'ks'):.3f} | {r.se(level, 'ks'):.3f} "
                f"| {r.rate(level, 'cv'):.3f} | {r.se(level, 'cv'):.3f} |"
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown table format {fmt!r}")


def parse_table(text: str) -> list[dict[str, Any]]:
    """Read back a CSV produced by :func:`emit_table`."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(
            {
                "model": row["model"],
                "reps": int(row["reps"]),
                **{c: float(row[c]) for c in ("KS", "KS_se", "CV", "CV_se")},
            }
        )
    return out
