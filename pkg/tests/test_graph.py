"""Correlation graph inference and Laplacian construction.

Ground truth:
- Hand-computed correlations for 3-sample rows (exact linear dependence,
  the sqrt(3)/2 case).
- np.corrcoef as the correlation oracle on random data.
- Dense np.linalg.eigh as the eigenvalue oracle for Laplacian spectra,
  lambda_max estimation, and the rescaled spectrum bounds.
"""
import warnings

import numpy as np
import pytest

from chebnet import (
    COMBINATORIAL,
    NORMALIZED,
    ContractError,
    CorrMatrix,
    DimensionError,
    SignalMatrix,
    SparseGraph,
    ValidationError,
    estimate_lambda_max,
    infer_graph,
    laplacian,
    pearson_correlation,
    read_edge_list_csv,
    rescale,
    rescaled_laplacian,
    write_edge_list_csv,
)


def random_graph(rng, n, density=0.4):
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.rand() < density:
                edges.append((i, j, rng.uniform(0.1, 2.0)))
    return SparseGraph(n, tuple(edges))


class TestSignalMatrix:
    def test_shape_properties(self):
        sm = SignalMatrix.from_values(np.arange(12.0).reshape(3, 4))
        assert sm.n_nodes == 3
        assert sm.n_subjects == 4

    def test_non_finite_rejected_with_coordinates(self):
        values = np.ones((3, 4))
        values[1, 2] = np.nan
        with pytest.raises(ValidationError, match="row 1.*column 2"):
            SignalMatrix.from_values(values)

    def test_id_count_mismatch(self):
        with pytest.raises(DimensionError):
            SignalMatrix(np.ones((2, 3)), ("a",), ("x", "y", "z"))

    def test_select_subjects_keeps_node_ids(self):
        sm = SignalMatrix.from_values(np.arange(12.0).reshape(3, 4))
        sub = sm.select_subjects([3, 1])
        assert sub.node_ids == sm.node_ids
        assert sub.subject_ids == ("subj3", "subj1")
        np.testing.assert_array_equal(sub.values, sm.values[:, [3, 1]])


class TestPearsonCorrelation:
    def test_exact_positive_linear_dependence(self):
        sm = SignalMatrix.from_values([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
        corr = pearson_correlation(sm)
        assert corr.values[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_exact_negative_linear_dependence(self):
        sm = SignalMatrix.from_values([[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]])
        corr = pearson_correlation(sm)
        assert corr.values[0, 1] == pytest.approx(-1.0, abs=1e-12)

    def test_hand_computed_sqrt3_over_2(self):
        # rows [1,2,3] and [1,1,2]: cov = 0.5, stds = sqrt(2/3), sqrt(2/9)
        # (population), correlation = 0.5 / sqrt(4/27) = sqrt(3)/2.
        sm = SignalMatrix.from_values([[1.0, 2.0, 3.0], [1.0, 1.0, 2.0]])
        corr = pearson_correlation(sm)
        assert corr.values[0, 1] == pytest.approx(np.sqrt(3.0) / 2.0, abs=1e-12)

    def test_zero_variance_row_gives_zero(self):
        sm = SignalMatrix.from_values([[5.0, 5.0, 5.0], [1.0, 2.0, 3.0]])
        corr = pearson_correlation(sm)
        assert corr.values[0, 1] == 0.0
        assert corr.values[1, 0] == 0.0
        assert corr.values[0, 0] == 0.0

    def test_matches_numpy_corrcoef(self):
        rng = np.random.RandomState(11)
        for _ in range(10):
            values = rng.randn(8, 25)
            sm = SignalMatrix.from_values(values)
            corr = pearson_correlation(sm)
            np.testing.assert_allclose(corr.values, np.corrcoef(values),
                                       atol=1e-12)

    def test_affine_invariance_positive_scale(self):
        rng = np.random.RandomState(3)
        values = rng.randn(6, 30)
        base = pearson_correlation(SignalMatrix.from_values(values)).values
        scaled = values.copy()
        scaled[2] = 3.7 * scaled[2] - 11.0
        scaled[4] = 0.01 * scaled[4] + 2.0
        again = pearson_correlation(SignalMatrix.from_values(scaled)).values
        np.testing.assert_allclose(again, base, atol=1e-10)

    def test_single_subject_rejected(self):
        sm = SignalMatrix.from_values([[1.0], [2.0]])
        with pytest.raises(DimensionError):
            pearson_correlation(sm)


class TestCorrMatrix:
    def test_rejects_asymmetry(self):
        bad = np.array([[0.0, 0.5], [0.4, 0.0]])
        with pytest.raises(ValidationError):
            CorrMatrix(bad)

    def test_rejects_out_of_range(self):
        bad = np.array([[0.0, 1.5], [1.5, 0.0]])
        with pytest.raises(ValidationError):
            CorrMatrix(bad)


class TestInferGraph:
    def test_strict_threshold(self):
        corr = CorrMatrix(np.array([
            [0.0, 0.7, 0.71],
            [0.7, 0.0, 0.69],
            [0.71, 0.69, 0.0],
        ]))
        g = infer_graph(corr, 0.7)
        # exactly-0.7 must not produce an edge
        assert g.edges == ((0, 2, 0.71),)

    def test_negative_correlation_never_an_edge(self):
        corr = CorrMatrix(np.array([[0.0, -0.95], [-0.95, 0.0]]))
        g = infer_graph(corr, 0.7)
        assert g.n_edges == 0

    def test_diagonal_never_produces_edges(self):
        corr = CorrMatrix(np.eye(4))
        g = infer_graph(corr, 0.5)
        assert g.n_edges == 0

    def test_edge_count_monotone_in_threshold(self):
        rng = np.random.RandomState(5)
        values = rng.randn(10, 40)
        corr = pearson_correlation(SignalMatrix.from_values(values))
        counts = [infer_graph(corr, t).n_edges for t in (0.0, 0.2, 0.4, 0.6, 0.8)]
        assert counts == sorted(counts, reverse=True)

    def test_weights_are_correlations(self):
        rng = np.random.RandomState(9)
        values = rng.randn(6, 50)
        corr = pearson_correlation(SignalMatrix.from_values(values))
        g = infer_graph(corr, 0.1)
        for i, j, w in g.edges:
            assert w == corr.values[i, j]
            assert w > 0.1

    def test_threshold_out_of_range_rejected(self):
        corr = CorrMatrix(np.eye(2))
        with pytest.raises(ValidationError):
            infer_graph(corr, 1.5)


class TestSparseGraph:
    def test_rejects_bad_endpoints(self):
        with pytest.raises(ValidationError):
            SparseGraph(3, ((2, 1, 1.0),))

    def test_rejects_duplicate_edges(self):
        with pytest.raises(ValidationError):
            SparseGraph(3, ((0, 1, 1.0), (0, 1, 2.0)))

    def test_rejects_edge_on_fake_node(self):
        with pytest.raises(ValidationError):
            SparseGraph(2, ((0, 1, 1.0),), fake=(False, True))

    def test_degrees_and_adjacency(self):
        g = SparseGraph(3, ((0, 1, 2.0), (1, 2, 3.0)))
        np.testing.assert_allclose(g.degrees(), [2.0, 5.0, 3.0])
        a = g.adjacency()
        assert a[0, 1] == a[1, 0] == 2.0
        assert a[0, 2] == 0.0
        np.testing.assert_allclose(g.adjacency_sparse().toarray(), a)


class TestLaplacian:
    def test_combinatorial_triangle(self):
        g = SparseGraph(3, ((0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)))
        lap = laplacian(g, COMBINATORIAL)
        expected = np.array([
            [2.0, -1.0, -1.0],
            [-1.0, 2.0, -1.0],
            [-1.0, -1.0, 2.0],
        ])
        np.testing.assert_allclose(lap.dense(), expected, atol=1e-15)

    def test_complete_graph_k5_eigenvalues(self):
        # K_5: combinatorial eigenvalues {0, 5 x4}; normalized {0, 5/4 x4}.
        n = 5
        edges = tuple((i, j, 1.0) for i in range(n) for j in range(i + 1, n))
        g = SparseGraph(n, edges)
        eigs_c = np.linalg.eigvalsh(laplacian(g, COMBINATORIAL).dense())
        np.testing.assert_allclose(eigs_c, [0.0] + [5.0] * 4, atol=1e-10)
        eigs_n = np.linalg.eigvalsh(laplacian(g, NORMALIZED).dense())
        np.testing.assert_allclose(eigs_n, [0.0] + [1.25] * 4, atol=1e-10)

    def test_normalized_unit_diagonal_on_connected(self):
        rng = np.random.RandomState(2)
        g = random_graph(rng, 8, density=1.0)
        lap = laplacian(g, NORMALIZED)
        np.testing.assert_allclose(lap.dense().diagonal(), np.ones(8), atol=1e-12)

    def test_isolated_node_rows_zero_both_kinds(self):
        g = SparseGraph(4, ((0, 1, 2.0),))  # nodes 2, 3 isolated
        for kind in (COMBINATORIAL, NORMALIZED):
            dense = laplacian(g, kind).dense()
            np.testing.assert_array_equal(dense[2], np.zeros(4))
            np.testing.assert_array_equal(dense[:, 3], np.zeros(4))

    def test_empty_graph_is_zero_matrix(self):
        g = SparseGraph(5, ())
        for kind in (COMBINATORIAL, NORMALIZED):
            assert laplacian(g, kind).entries.nnz == 0

    def test_combinatorial_psd_and_nullspace(self):
        rng = np.random.RandomState(7)
        for _ in range(20):
            g = random_graph(rng, rng.randint(2, 12))
            dense = laplacian(g, COMBINATORIAL).dense()
            eigs = np.linalg.eigvalsh(dense)
            assert eigs.min() >= -1e-10
            np.testing.assert_allclose(dense @ np.ones(g.n), np.zeros(g.n),
                                       atol=1e-12)

    def test_row_sums_zero_combinatorial(self):
        rng = np.random.RandomState(13)
        g = random_graph(rng, 9)
        dense = laplacian(g, COMBINATORIAL).dense()
        np.testing.assert_allclose(dense.sum(axis=1), np.zeros(9), atol=1e-12)


class TestEstimateLambdaMax:
    def test_matches_dense_eigensolve(self):
        rng = np.random.RandomState(42)
        for _ in range(40):
            n = rng.randint(2, 51)
            g = random_graph(rng, n, density=rng.uniform(0.1, 0.9))
            for kind in (COMBINATORIAL, NORMALIZED):
                lap = laplacian(g, kind)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    est = estimate_lambda_max(lap, tol=1e-6, max_iter=20000)
                if lap.entries.nnz == 0:
                    assert float(est) == 0.0
                    continue
                true = np.linalg.eigvalsh(lap.dense()).max()
                assert abs(float(est) - true) <= 1e-6 * max(true, 1.0), \
                    f"n={n} kind={kind}: est {float(est)} vs eigh {true}"

    def test_zero_matrix_returns_zero(self):
        lap = laplacian(SparseGraph(4, ()), NORMALIZED)
        est = estimate_lambda_max(lap)
        assert float(est) == 0.0
        assert est.converged

    def test_single_edge_two_nodes(self):
        # Normalized Laplacian [[1,-1],[-1,1]] has lambda_max exactly 2;
        # the all-ones start vector is its null vector, so this case
        # guards against stopping on the null-space plateau.
        g = SparseGraph(2, ((0, 1, 4.6),))
        est = estimate_lambda_max(laplacian(g, NORMALIZED))
        assert float(est) == pytest.approx(2.0, abs=1e-6)
        assert est.converged

    def test_nonconvergence_flagged_and_warned(self):
        rng = np.random.RandomState(1)
        g = random_graph(rng, 30, density=0.5)
        lap = laplacian(g, NORMALIZED)
        with pytest.warns(RuntimeWarning):
            est = estimate_lambda_max(lap, tol=1e-6, max_iter=2)
        assert not est.converged
        assert est.iterations == 2

    def test_rejects_rescaled_input(self):
        g = SparseGraph(3, ((0, 1, 1.0),))
        lap = rescaled_laplacian(g, NORMALIZED)
        with pytest.raises(ContractError):
            estimate_lambda_max(lap)


class TestRescale:
    def test_zero_matrix_becomes_minus_identity(self):
        lap = laplacian(SparseGraph(4, ()), COMBINATORIAL)
        scaled = rescale(lap, 0.0)
        np.testing.assert_array_equal(scaled.dense(), -np.eye(4))
        assert scaled.rescaled
        assert scaled.lambda_max == 2.0

    def test_spectrum_in_unit_interval(self):
        rng = np.random.RandomState(23)
        for _ in range(20):
            g = random_graph(rng, rng.randint(2, 15))
            for kind in (COMBINATORIAL, NORMALIZED):
                scaled = rescaled_laplacian(g, kind)
                eigs = np.linalg.eigvalsh(scaled.dense())
                assert eigs.min() >= -1.0 - 1e-9
                assert eigs.max() <= 1.0 + 1e-9

    def test_exact_mapping_of_extremes(self):
        # With the true lambda_max, the top eigenvalue maps to 1 and the
        # zero eigenvalue maps to -1.
        g = SparseGraph(3, ((0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)))
        lap = laplacian(g, COMBINATORIAL)
        true = np.linalg.eigvalsh(lap.dense()).max()
        scaled = rescale(lap, true)
        eigs = np.linalg.eigvalsh(scaled.dense())
        assert eigs.max() == pytest.approx(1.0, abs=1e-12)
        assert eigs.min() == pytest.approx(-1.0, abs=1e-12)

    def test_rejects_double_rescale(self):
        g = SparseGraph(3, ((0, 1, 1.0),))
        scaled = rescaled_laplacian(g, NORMALIZED)
        with pytest.raises(ContractError):
            rescale(scaled, 2.0)


class TestEdgeListCsv:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.RandomState(31)
        g = random_graph(rng, 12)
        path = tmp_path / "graph.csv"
        write_edge_list_csv(g, path)
        back = read_edge_list_csv(path, n=12)
        assert back.n == g.n
        assert back.edges == g.edges

    def test_header_written(self, tmp_path):
        g = SparseGraph(3, ((0, 2, 0.75),))
        path = tmp_path / "graph.csv"
        write_edge_list_csv(g, path)
        assert path.read_text().splitlines()[0] == "src,dst,weight"

    def test_node_count_inferred_when_omitted(self, tmp_path):
        g = SparseGraph(5, ((0, 4, 1.0),))
        path = tmp_path / "graph.csv"
        write_edge_list_csv(g, path)
        back = read_edge_list_csv(path)
        assert back.n == 5
