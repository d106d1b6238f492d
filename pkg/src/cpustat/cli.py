"""Command-line interface.

Subcommands: ``simulate-null``, ``detect``, ``gen-data``, ``experiment``.

Exit codes: 0 success, 2 invalid arguments or input, 3 I/O failure,
4 non-positive variance.
"""

from __future__ import annotations

import argparse
import ast
import csv
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from cpustat.core import CpustatError, NonPositiveVariance, kernel_from_tag
from cpustat.datagen import (
    SCENARIO_TAGS,
    ScenarioSpec,
    build_scenario,
    null_segments,
    simulate_piecewise,
)
from cpustat.detect import detect
from cpustat.experiments import ExperimentResult, empirical_level, empirical_power, emit_table
from cpustat.nulldist import (
    TABLE1_LEVELS,
    NullSamples,
    QuantileTable,
    cache_path,
    cached_samples,
    load_samples,
    replication_rng,
)

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_VARIANCE = 4

CI_M = 500
CI_REPS = 1000


class UsageError(Exception):
    pass


def _default_seed() -> int:
    env = os.environ.get("CPUSTAT_SEED")
    if env is None:
        return 42
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"CPUSTAT_SEED must be an integer, got {env!r}") from None


def _levels(text: str | None) -> tuple[float, ...]:
    if text is None:
        return TABLE1_LEVELS
    try:
        vals = tuple(sorted(float(v) for v in text.split(",") if v.strip()))
    except ValueError:
        raise UsageError(f"bad --levels {text!r}") from None
    if not vals or any(not 0 < v < 1 for v in vals):
        raise UsageError("--levels must be comma-separated numbers in (0, 1)")
    return vals


def _positive(name: str, value: int, minimum: int = 1) -> None:
    if value < minimum:
        raise UsageError(f"--{name} must be >= {minimum}, got {value}")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def read_series_csv(path: str | Path) -> list[float]:
    """Values from a CSV with an optional header, one value per line.

    A single column is the normal layout; with several columns the last one
    is read, so ``index,value`` files written by ``gen-data`` work directly.
    """
    values: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh)):
            if not row or not row[-1].strip():
                continue
            cell = row[-1].strip()
            try:
                values.append(float(cell))
            except ValueError:
                if lineno == 0 and not values:
                    continue  # header
                raise UsageError(f"{path}:{lineno + 1}: not a number: {cell!r}") from None
    return values


# ---------------------------------------------------------------------------
# simulate-null
# ---------------------------------------------------------------------------


def cmd_simulate_null(args: argparse.Namespace) -> int:
    _positive("k", args.k)
    _positive("m", args.m, 4)
    _positive("reps", args.reps, 100)
    _positive("stride", args.stride)
    _positive("threads", args.threads)
    levels = _levels(args.levels)
    seed = _default_seed() if args.seed is None else args.seed
    samples = cached_samples(args.cache, args.k, args.m, args.reps, seed, args.stride, args.threads)
    table = samples.table(levels)
    out = Path(args.out) if args.out else Path(f"quantiles_k{args.k}_m{args.m}_r{args.reps}_s{seed}")
    _write(out.with_suffix(".csv"), table.to_csv())
    _write(out.with_suffix(".json"), table.to_json())
    print(table.grid_text())
    print(f"wrote {out.with_suffix('.csv')} and {out.with_suffix('.json')}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# detect
# ---------------------------------------------------------------------------


def _null_for_detect(args: argparse.Namespace, seed: int) -> tuple[QuantileTable | None, NullSamples | None]:
    if args.table:
        text = Path(args.table).read_text(encoding="utf-8")
        if args.table.endswith(".json"):
            return QuantileTable.from_json(text), None
        return QuantileTable.from_csv(text, {"k": args.k}), None
    path = cache_path(args.cache, args.k, args.m, args.reps, seed, 1)
    if path.exists():
        return None, load_samples(path)
    if args.build_null:
        return None, cached_samples(args.cache, args.k, args.m, args.reps, seed, 1, args.threads)
    print(
        f"warning: no cached null table for k={args.k}, m={args.m}, reps={args.reps}, seed={seed}; "
        f"using a CI-scale table (m={CI_M}, reps={CI_REPS})",
        file=sys.stderr,
    )
    return None, cached_samples(args.cache, args.k, CI_M, CI_REPS, seed, 1, args.threads)


def cmd_detect(args: argparse.Namespace) -> int:
    _positive("k", args.k)
    if args.stride is not None:
        _positive("stride", args.stride)
    try:
        kernel = kernel_from_tag(args.kernel)
    except CpustatError as exc:
        raise UsageError(str(exc)) from None
    seed = _default_seed() if args.seed is None else args.seed
    levels = _levels(args.levels) if args.levels else None
    values = read_series_csv(args.input)
    table, null = _null_for_detect(args, seed)
    if table is not None and table.meta.get("k", args.k) != args.k:
        raise UsageError(f"quantile table is for k={table.meta['k']}, not k={args.k}")
    report = detect(
        values,
        k=args.k,
        kernel=kernel,
        lrv=args.lrv,
        stride=args.stride,
        table=table,
        null=null,
        levels=levels,
        sigma2=args.sigma2,
    )
    print(report.summary())
    if args.out:
        _write(Path(args.out), json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return 0


# ---------------------------------------------------------------------------
# gen-data
# ---------------------------------------------------------------------------


def _parse_triple(text: str) -> tuple[float, float, float]:
    try:
        val = ast.literal_eval(text.strip())
        mu, rho, omega = (float(v) for v in val)
    except (ValueError, SyntaxError, TypeError):
        raise UsageError(f"expected a triple like '(0,0.5,1)', got {text!r}") from None
    return mu, rho, omega


def _scenario(args: argparse.Namespace) -> ScenarioSpec:
    tag = args.scenario
    if tag not in SCENARIO_TAGS:
        raise UsageError(f"unknown scenario {tag!r}; choose from {', '.join(SCENARIO_TAGS)}")
    if tag == "mean-mean":
        return ScenarioSpec.mean_mean(args.mu2, args.mu3)
    if tag == "mean-mean-ar":
        return ScenarioSpec.mean_mean_ar(args.mu2, args.mu3, args.rho)
    if tag == "mean-autocorr":
        return ScenarioSpec.mean_autocorr(args.mu2, args.rho3)
    return ScenarioSpec.mean_variance(args.mu2, args.omega3)


def cmd_gen_data(args: argparse.Namespace) -> int:
    seed = _default_seed() if args.seed is None else args.seed
    if args.null is not None:
        mu, rho, omega = _parse_triple(args.null)
        _positive("n", args.n, 4)
        try:
            segments = null_segments(mu, rho, omega, args.n)
        except CpustatError as exc:
            raise UsageError(str(exc)) from None
        meta: dict[str, Any] = {"null_model": [mu, rho, omega]}
    elif args.scenario is not None:
        spec = _scenario(args)
        segments = build_scenario(spec)
        meta = {"scenario": spec.tag, "params": {"mu2": spec.mu2, "mu3": spec.mu3, "rho": spec.rho,
                                                  "rho3": spec.rho3, "omega3": spec.omega3}}
    else:
        raise UsageError("give --scenario or --null")
    series, changes = simulate_piecewise(segments, replication_rng(seed, 0))
    out = Path(args.out)
    lines = ["index,value"] + [f"{i},{v!r}" for i, v in enumerate(series.values.tolist(), start=1)]
    _write(out, "\n".join(lines) + "\n")
    truth = Path(args.truth) if args.truth else out.with_suffix(".truth.json")
    doc = {"n": series.n, "changes": list(changes), "seed": seed, **meta}
    _write(truth, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out} ({series.n} rows) and {truth}; changes at {list(changes)}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------


def _experiment_key(what: dict[str, Any], reps: int, seed: int, digest: str) -> str:
    payload = json.dumps({"what": what, "reps": reps, "seed": seed, "table": digest}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:20]


def cmd_experiment(args: argparse.Namespace) -> int:
    _positive("reps", args.reps)
    _positive("threads", args.threads)
    seed = _default_seed() if args.seed is None else args.seed
    levels = _levels(args.levels) if args.levels else (0.05,)
    if args.table:
        table = QuantileTable.from_json(Path(args.table).read_text(encoding="utf-8"))
    else:
        path = cache_path(args.cache, 2, args.null_m, args.null_reps, args.null_seed, 1)
        if path.exists() or args.build_null:
            samples = cached_samples(args.cache, 2, args.null_m, args.null_reps, args.null_seed, 1, args.threads)
        else:
            print(
                f"warning: no cached null table for m={args.null_m}, reps={args.null_reps}; "
                f"using a CI-scale table (m={CI_M}, reps={CI_REPS})",
                file=sys.stderr,
            )
            samples = cached_samples(args.cache, 2, CI_M, CI_REPS, args.null_seed, 1, args.threads)
        table = samples.table(sorted(set(TABLE1_LEVELS) | set(levels)))
    for a in levels:
        table.critical(a)

    if args.row is not None:
        triple = _parse_triple(args.row)
        what: dict[str, Any] = {"row": list(triple), "n": args.n}
    elif args.scenario is not None:
        spec = _scenario(args)
        what = {"scenario": spec.tag, "mu2": spec.mu2, "mu3": spec.mu3, "rho": spec.rho,
                "rho3": spec.rho3, "omega3": spec.omega3}
    else:
        raise UsageError("give --row or --scenario")

    key = _experiment_key({**what, "levels": list(levels)}, args.reps, seed, table.digest())
    cache_file = Path(args.cache) / f"exp-{key}.json"
    if cache_file.exists():
        result = ExperimentResult.from_dict(json.loads(cache_file.read_text(encoding="utf-8")))
    else:
        if args.row is not None:
            result = empirical_level(triple, args.n, args.reps, table, seed, levels, args.threads)
        else:
            result = empirical_power(spec, args.reps, table, seed, levels, args.threads)
        _write(cache_file, json.dumps(result.to_dict(samples=True), sort_keys=True) + "\n")
        print(f"runtime {result.runtime:.2f}s", file=sys.stderr)

    chunks = [emit_table([result], args.format, level=a) for a in levels]
    text = "".join(chunks)
    sys.stdout.write(text)
    if args.out:
        _write(Path(args.out), text)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (default: $CPUSTAT_SEED, else 42)")
    p.add_argument("--threads", type=int, default=1, help="worker threads; output does not depend on it")
    p.add_argument("--cache", default="cache", help="cache directory for null samples and results")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpustat",
        description="Multiple change-point tests based on U-statistics (KS and CV types).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-null", help="simulate quantiles of the limiting null distributions")
    p.add_argument("--k", type=int, default=2, help="number of change-points")
    p.add_argument("--m", type=int, default=2000, help="bridge grid resolution")
    p.add_argument("--reps", type=int, default=5000, help="number of simulated paths")
    p.add_argument("--stride", type=int, default=1, help="grid decimation step")
    p.add_argument("--levels", default=None, help="comma-separated levels (default 0.01,...,0.10)")
    p.add_argument("--out", default=None, help="output prefix; writes PREFIX.csv and PREFIX.json")
    _common(p)
    p.set_defaults(func=cmd_simulate_null)

    p = sub.add_parser("detect", help="test a series in a CSV file for k change-points")
    p.add_argument("input", help="single-column CSV, optional header")
    p.add_argument("--k", type=int, default=2, help="number of change-points")
    p.add_argument("--kernel", default="difference", help="difference | indicator")
    p.add_argument("--lrv", default="ar1", choices=["ar1", "newey-west", "subsampling", "spectral"],
                   help="long-run variance estimator")
    p.add_argument("--sigma2", type=float, default=None, help="use this long-run variance instead of estimating it")
    p.add_argument("--stride", type=int, default=None, help="grid decimation step (default: automatic)")
    p.add_argument("--table", default=None, help="quantile table (.json or .csv) to use instead of the cache")
    p.add_argument("--m", type=int, default=2000, help="bridge resolution of the cached null table")
    p.add_argument("--reps", type=int, default=5000, help="replications of the cached null table")
    p.add_argument("--build-null", action="store_true",
                   help="simulate the requested null table on a cache miss instead of the CI-scale one")
    p.add_argument("--levels", default=None, help="comma-separated levels")
    p.add_argument("--out", default=None, help="write the JSON report here")
    _common(p)
    p.set_defaults(func=cmd_detect)

    for name, helptext in (
        ("gen-data", "generate a series from the piecewise AR(1) model"),
        ("experiment", "estimate empirical level or power"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--scenario", default=None, help=f"one of {', '.join(SCENARIO_TAGS)}")
        p.add_argument("--mu2", type=float, default=0.0, help="mean of segment 2")
        p.add_argument("--mu3", type=float, default=0.0, help="mean of segment 3 (mean-mean scenarios)")
        p.add_argument("--rho", type=float, default=0.2, help="common AR coefficient (mean-mean-ar)")
        p.add_argument("--rho3", type=float, default=0.0, help="AR coefficient of segment 3 (mean-autocorr)")
        p.add_argument("--omega3", type=float, default=1.0, help="innovation scale of segment 3 (mean-variance)")
        p.add_argument("--n", type=int, default=200, help="series length for null models")
        _common(p)
        if name == "gen-data":
            p.add_argument("--null", default=None, help="homogeneous model '(mu,rho,omega)'")
            p.add_argument("--out", default="data.csv", help="output CSV (index,value)")
            p.add_argument("--truth", default=None, help="ground-truth JSON (default: OUT.truth.json)")
            p.set_defaults(func=cmd_gen_data)
        else:
            p.add_argument("--row", default=None, help="null model '(mu,rho,omega)' for a level row")
            p.add_argument("--reps", type=int, default=1000, help="Monte Carlo replications")
            p.add_argument("--levels", default=None, help="comma-separated levels (default 0.05)")
            p.add_argument("--table", default=None, help="quantile table JSON")
            p.add_argument("--null-m", type=int, default=2000, help="bridge resolution of the null table")
            p.add_argument("--null-reps", type=int, default=5000, help="replications of the null table")
            p.add_argument("--null-seed", type=int, default=42, help="seed of the null table")
            p.add_argument("--build-null", action="store_true",
                           help="simulate the requested null table on a cache miss")
            p.add_argument("--format", default="csv", choices=["csv", "markdown"], help="table format")
            p.add_argument("--out", default=None, help="also write the table here")
            p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except NonPositiveVariance as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VARIANCE
    except (UsageError, CpustatError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
