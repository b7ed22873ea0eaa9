"""Filter timing harness: row structure, agreement column, CSV schema.

Ground truth:
- Both filter paths must agree (max_abs_err tiny) because the spectral
  tests already establish their equivalence; the benchmark only repeats
  the comparison on its own graphs.
- Edge counts come from density * C(n,2) by construction.
"""
import math

import numpy as np
import pytest

from chebnet import BenchmarkRow, ValidationError, run_benchmark, write_benchmark_csv
from chebnet.benchmark import read_benchmark_csv


class TestRunBenchmark:
    def test_two_rows_per_density_below_dense_limit(self):
        rows = run_benchmark(32, 3, [0.1, 0.2], seed=0, timing_repeats=1)
        assert len(rows) == 4
        assert [r.method for r in rows] == ["chebyshev", "dense",
                                            "chebyshev", "dense"]
        for r in rows:
            assert r.n == 32
            assert r.K == 3
            assert r.seconds > 0.0

    def test_edge_counts_follow_density(self):
        rows = run_benchmark(32, 3, [0.1, 0.2], seed=0, timing_repeats=1)
        max_edges = 32 * 31 // 2
        assert rows[0].edges == round(0.1 * max_edges)
        assert rows[2].edges == round(0.2 * max_edges)

    def test_methods_agree(self):
        rows = run_benchmark(48, 5, [0.15], seed=2, timing_repeats=1)
        for r in rows:
            assert r.max_abs_err <= 1e-9

    def test_above_dense_limit_chebyshev_only(self):
        rows = run_benchmark(32, 3, [0.1], seed=0, timing_repeats=1,
                             dense_limit=16)
        assert [r.method for r in rows] == ["chebyshev"]
        assert math.isnan(rows[0].max_abs_err)

    def test_rejects_bad_density(self):
        with pytest.raises(ValidationError):
            run_benchmark(16, 3, [0.0])
        with pytest.raises(ValidationError):
            run_benchmark(16, 3, [1.5])
        with pytest.raises(ValidationError):
            run_benchmark(16, 3, [])


class TestBenchmarkCsv:
    def test_round_trip_with_nan(self, tmp_path):
        rows = [BenchmarkRow(16, 10, 3, "chebyshev", 0.0015, 2.5e-12),
                BenchmarkRow(16, 10, 3, "chebyshev", 0.002, math.nan)]
        path = tmp_path / "benchmark.csv"
        write_benchmark_csv(rows, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "n,edges,K,method,seconds,max_abs_err"
        assert lines[2].endswith(",")  # NaN serialized as empty cell
        back = read_benchmark_csv(path)
        assert back[0] == rows[0]
        assert math.isnan(back[1].max_abs_err)
        assert back[1].seconds == rows[1].seconds

    def test_rejects_wrong_header(self, tmp_path):
        path = tmp_path / "benchmark.csv"
        path.write_text("a,b\n")
        with pytest.raises(ValidationError):
            read_benchmark_csv(path)
