"""Timing harness contrasting the two filter application paths.

For each requested edge density it builds a random graph, then times the
sparse Chebyshev recursion against the dense eigendecomposition filter
applying the same polynomial of the same rescaled Laplacian. The maximum
absolute difference between the two outputs doubles as a cross-method
correctness check whenever the dense path is feasible.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .graph import NORMALIZED, rescaled_laplacian
from .spectral import (DEFAULT_DENSE_LIMIT, MONOMIAL, FilterCoefficients,
                       NodeSignal, chebyshev_filter, chebyshev_from_monomial,
                       exact_spectral_filter)
from .training import baseline_graph

BENCHMARK_HEADER = ["n", "edges", "K", "method", "seconds", "max_abs_err"]


@dataclass(frozen=True)
class BenchmarkRow:
    """One timed configuration; max_abs_err is NaN when only one method ran."""

    n: int
    edges: int
    K: int
    method: str
    seconds: float
    max_abs_err: float


def _time_best_of(fn, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def run_benchmark(n: int, k: int, densities, seed: int = 0,
                  timing_repeats: int = 3,
                  dense_limit: int = DEFAULT_DENSE_LIMIT) -> list:
    """Rows per (density, method); density is the filled fraction of pairs."""
    densities = [float(d) for d in densities]
    if not densities:
        raise ValidationError("need at least one density")
    if any(not 0.0 < d <= 1.0 for d in densities):
        raise ValidationError(f"densities must lie in (0, 1], got {densities}")
    if timing_repeats < 1:
        raise ValidationError("timing repeats must be positive")
    max_edges = n * (n - 1) // 2
    rows = []
    for i, density in enumerate(densities):
        seeds = np.random.SeedSequence(seed, spawn_key=(i,)).generate_state(2)
        n_edges = max(1, round(density * max_edges))
        g = baseline_graph("random", n, n_edges, int(seeds[0]))
        lap = rescaled_laplacian(g, NORMALIZED)
        rng = np.random.default_rng(int(seeds[1]))
        x = NodeSignal(rng.standard_normal(n))
        theta_mono = FilterCoefficients(MONOMIAL, rng.standard_normal(k))
        theta_cheb = chebyshev_from_monomial(theta_mono)

        cheb_seconds = _time_best_of(lambda: chebyshev_filter(lap, x, theta_cheb),
                                     timing_repeats)
        if n <= dense_limit:
            dense_seconds = _time_best_of(
                lambda: exact_spectral_filter(lap, x, theta_mono, dense_limit),
                timing_repeats)
            y_cheb = chebyshev_filter(lap, x, theta_cheb)
            y_dense = exact_spectral_filter(lap, x, theta_mono, dense_limit)
            err = float(np.abs(y_cheb.values - y_dense.values).max())
            rows.append(BenchmarkRow(n, n_edges, k, "chebyshev", cheb_seconds, err))
            rows.append(BenchmarkRow(n, n_edges, k, "dense", dense_seconds, err))
        else:
            rows.append(BenchmarkRow(n, n_edges, k, "chebyshev", cheb_seconds,
                                     math.nan))
    return rows


def write_benchmark_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCHMARK_HEADER)
        for r in rows:
            err = "" if math.isnan(r.max_abs_err) else repr(r.max_abs_err)
            writer.writerow([r.n, r.edges, r.K, r.method, repr(r.seconds), err])


def read_benchmark_csv(path) -> list:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != BENCHMARK_HEADER:
            raise ValidationError(f"unexpected benchmark header {header}")
        for row in reader:
            rows.append(BenchmarkRow(int(row[0]), int(row[1]), int(row[2]), row[3],
                                     float(row[4]),
                                     math.nan if row[5] == "" else float(row[5])))
    return rows
