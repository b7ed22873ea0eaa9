"""Heavy-edge matching, graph contraction, padding, and max-pooling.

Ground truth:
- Hand-traced matchings on 3- and 4-node graphs with explicit visit
  orders (scores w_ij * (1/d_i + 1/d_j) computed by hand).
- Hand-summed cluster weights for contraction.
- Structural invariants: exact halving of padded level sizes, edgeless
  fake nodes, bijective permutations, parent maps equal to index // 2.
"""
import json

import numpy as np
import pytest

from chebnet import (
    CoarseningHierarchy,
    DimensionError,
    Matching,
    NodeSignal,
    SparseGraph,
    ValidationError,
    build_hierarchy,
    coarsen_once,
    heavy_edge_matching,
    permute_signal,
    pool,
    write_hierarchy_json,
)


def complete_graph(n, weight=1.0):
    edges = tuple((i, j, weight) for i in range(n) for j in range(i + 1, n))
    return SparseGraph(n, edges)


def disjoint_pairs_graph(n):
    assert n % 2 == 0
    return SparseGraph(n, tuple((2 * i, 2 * i + 1, 1.0) for i in range(n // 2)))


class TestMatching:
    def test_cluster_count(self):
        m = Matching(((0, 1),), (2, 3))
        assert m.n_clusters() == 3

    def test_covered_nodes(self):
        m = Matching(((0, 1), (4, 5)), (2,))
        assert m.covered_nodes() == {0, 1, 2, 4, 5}


class TestHeavyEdgeMatching:
    def test_hand_traced_path(self):
        # Path 0-1-2-3, weights 1/2/1; degrees 1, 3, 3, 1.
        # Visiting 0 first: only neighbor is 1, so (0, 1); then 2 pairs 3.
        g = SparseGraph(4, ((0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0)))
        m = heavy_edge_matching(g, seed=0, order=[0, 1, 2, 3])
        assert m.pairs == ((0, 1), (2, 3))
        assert m.singletons == ()

    def test_heavy_edge_preferred(self):
        # Triangle with one heavy edge; degrees 11, 11, 2.
        # From node 0: score(1) = 10 * (1/11 + 1/11) = 20/11, while
        # score(2) = 1 * (1/11 + 1/2) < 1, so 0 pairs with 1.
        g = SparseGraph(3, ((0, 1, 10.0), (0, 2, 1.0), (1, 2, 1.0)))
        m = heavy_edge_matching(g, seed=0, order=[0, 1, 2])
        assert m.pairs == ((0, 1),)
        assert m.singletons == (2,)

    def test_tie_breaks_to_lowest_index(self):
        # Star with equal weights: from the hub both scores tie, so the
        # lowest-indexed leaf wins.
        g = SparseGraph(3, ((0, 1, 1.0), (0, 2, 1.0)))
        m = heavy_edge_matching(g, seed=0, order=[0, 1, 2])
        assert m.pairs == ((0, 1),)
        assert m.singletons == (2,)

    def test_isolated_node_becomes_singleton(self):
        g = SparseGraph(3, ((0, 1, 1.0),))
        m = heavy_edge_matching(g, seed=5)
        assert (0, 1) in m.pairs
        assert 2 in m.singletons

    def test_pairs_disjoint_and_cover_all(self):
        rng = np.random.RandomState(3)
        for trial in range(20):
            n = rng.randint(2, 25)
            edges = []
            for i in range(n):
                for j in range(i + 1, n):
                    if rng.rand() < 0.3:
                        edges.append((i, j, rng.uniform(0.1, 2.0)))
            g = SparseGraph(n, tuple(edges))
            m = heavy_edge_matching(g, seed=trial)
            seen = []
            for i, j in m.pairs:
                seen.extend([i, j])
            seen.extend(m.singletons)
            assert sorted(seen) == list(range(n))

    def test_seeded_determinism(self):
        g = complete_graph(10)
        a = heavy_edge_matching(g, seed=7)
        b = heavy_edge_matching(g, seed=7)
        assert a.pairs == b.pairs
        assert a.singletons == b.singletons

    def test_rejects_bad_explicit_order(self):
        g = SparseGraph(3, ((0, 1, 1.0),))
        with pytest.raises(ValidationError):
            heavy_edge_matching(g, seed=0, order=[0, 1, 1])


class TestCoarsenOnce:
    def test_hand_summed_cross_weights(self):
        # Clusters {0,1} and {2,3}; cross edges 1-2 (1.0), 0-3 (2.0),
        # 0-2 (0.5) sum to 3.5; the intra-pair edge 0-1 is dropped.
        g = SparseGraph(4, ((0, 1, 5.0), (1, 2, 1.0), (0, 3, 2.0),
                           (0, 2, 0.5)))
        coarse, parent = coarsen_once(g, Matching(((0, 1), (2, 3)), ()))
        assert coarse.n == 2
        assert coarse.edges == ((0, 1, 3.5),)
        np.testing.assert_array_equal(parent, [0, 0, 1, 1])

    def test_singletons_become_clusters(self):
        # Clusters sorted by members: (0,), (1,2), (3,).
        g = SparseGraph(4, ((1, 2, 1.0), (0, 1, 1.0), (2, 3, 1.0)))
        coarse, parent = coarsen_once(g, Matching(((1, 2),), (0, 3)))
        assert coarse.n == 3
        np.testing.assert_array_equal(parent, [0, 1, 1, 2])
        assert coarse.edges == ((0, 1, 1.0), (1, 2, 1.0))

    def test_no_self_loops(self):
        rng = np.random.RandomState(9)
        for trial in range(10):
            n = rng.randint(4, 16)
            edges = [(i, j, rng.uniform(0.5, 1.5))
                     for i in range(n) for j in range(i + 1, n)
                     if rng.rand() < 0.5]
            g = SparseGraph(n, tuple(edges))
            m = heavy_edge_matching(g, seed=trial)
            coarse, _ = coarsen_once(g, m)
            for i, j, _ in coarse.edges:
                assert i != j

    def test_weight_conservation_minus_intra(self):
        g = SparseGraph(4, ((0, 1, 5.0), (1, 2, 1.0), (0, 3, 2.0),
                           (0, 2, 0.5)))
        m = Matching(((0, 1), (2, 3)), ())
        coarse, _ = coarsen_once(g, m)
        fine_total = sum(w for _, _, w in g.edges)
        coarse_total = sum(w for _, _, w in coarse.edges)
        assert coarse_total == pytest.approx(fine_total - 5.0)

    def test_rejects_incomplete_matching(self):
        g = SparseGraph(3, ((0, 1, 1.0),))
        with pytest.raises(ValidationError):
            coarsen_once(g, Matching(((0, 1),), ()))


class TestBuildHierarchy:
    def test_complete_graph_needs_no_padding(self):
        # Greedy matching on a complete graph with an even node count
        # always pairs every node, and the contraction of a complete
        # graph is complete, so each level is exactly half the previous.
        h = build_hierarchy(complete_graph(8), n_levels=3, seed=0)
        assert h.level_sizes == (8, 4, 2, 1)
        assert h.fake_counts == (0, 0, 0, 0)
        assert h.n_real == 8

    def test_arbitrary_graph_halves_exactly(self):
        rng = np.random.RandomState(31)
        for trial in range(8):
            n = rng.randint(3, 30)
            edges = [(i, j, rng.uniform(0.1, 2.0))
                     for i in range(n) for j in range(i + 1, n)
                     if rng.rand() < 0.25]
            g = SparseGraph(n, tuple(edges))
            h = build_hierarchy(g, n_levels=3, seed=trial)
            sizes = h.level_sizes
            for l in range(3):
                assert sizes[l] == 2 * sizes[l + 1]

    def test_fake_nodes_carry_no_edges(self):
        g = disjoint_pairs_graph(8)
        h = build_hierarchy(g, n_levels=3, seed=0)
        assert sum(h.fake_counts) > 0  # padding actually happened
        for level in h.levels:
            for i, j, _ in level.edges:
                assert not level.fake[i]
                assert not level.fake[j]

    def test_perm_is_bijection_listing_real_nodes_once(self):
        g = disjoint_pairs_graph(8)
        h = build_hierarchy(g, n_levels=2, seed=1)
        assert sorted(h.perm.tolist()) == list(range(h.levels[0].n))
        real_ids = [p for p in h.perm.tolist() if p < h.n_real]
        assert sorted(real_ids) == list(range(8))

    def test_parents_are_stride_two(self):
        h = build_hierarchy(complete_graph(8), n_levels=3, seed=0)
        for l in range(3):
            np.testing.assert_array_equal(
                h.parents[l], np.arange(h.levels[l].n) // 2)

    def test_deterministic_for_seed(self):
        g = complete_graph(12, weight=1.0)
        h1 = build_hierarchy(g, n_levels=3, seed=42)
        h2 = build_hierarchy(g, n_levels=3, seed=42)
        assert h1.level_sizes == h2.level_sizes
        np.testing.assert_array_equal(h1.perm, h2.perm)
        for a, b in zip(h1.levels, h2.levels):
            assert a.edges == b.edges

    def test_coarse_edges_follow_parent_clusters(self):
        # Every level-1 edge must connect clusters that have at least one
        # cross edge at level 0, with the summed weight.
        rng = np.random.RandomState(77)
        edges = [(i, j, float(rng.uniform(0.5, 1.5)))
                 for i in range(10) for j in range(i + 1, 10)
                 if rng.rand() < 0.5]
        g = SparseGraph(10, tuple(edges))
        h = build_hierarchy(g, n_levels=1, seed=3)
        expected = {}
        for i, j, w in h.levels[0].edges:
            pi, pj = i // 2, j // 2
            if pi == pj:
                continue
            key = (min(pi, pj), max(pi, pj))
            expected[key] = expected.get(key, 0.0) + w
        got = {(i, j): w for i, j, w in h.levels[1].edges}
        assert set(got) == set(expected)
        for key in expected:
            assert got[key] == pytest.approx(expected[key], abs=1e-12)

    def test_rejects_zero_levels(self):
        with pytest.raises(ValidationError):
            build_hierarchy(complete_graph(4), n_levels=0, seed=0)


class TestCoarseningHierarchyValidation:
    def test_rejects_non_halving_levels(self):
        levels = (SparseGraph(4, ()), SparseGraph(3, ()))
        with pytest.raises(ValidationError):
            CoarseningHierarchy(levels, (np.arange(4) // 2,),
                                np.arange(4), (0, 0), 4)

    def test_rejects_non_bijective_perm(self):
        levels = (SparseGraph(4, ()), SparseGraph(2, ()))
        with pytest.raises(ValidationError):
            CoarseningHierarchy(levels, (np.arange(4) // 2,),
                                np.array([0, 0, 1, 2]), (0, 0), 4)


class TestPermuteSignal:
    def test_real_rows_relocated_fake_rows_zero(self):
        g = disjoint_pairs_graph(6)
        h = build_hierarchy(g, n_levels=2, seed=0)
        x = NodeSignal(np.arange(1.0, 7.0))
        px = permute_signal(x, h)
        assert px.n_nodes == h.levels[0].n
        for pos, orig in enumerate(h.perm.tolist()):
            if orig < h.n_real:
                assert px.values[pos, 0] == x.values[orig, 0]
            else:
                assert px.values[pos, 0] == 0.0

    def test_rejects_wrong_length(self):
        h = build_hierarchy(complete_graph(4), n_levels=1, seed=0)
        with pytest.raises(DimensionError):
            permute_signal(NodeSignal(np.ones(5)), h)

    def test_pool_after_permute_maxes_sibling_pairs(self):
        h = build_hierarchy(complete_graph(8), n_levels=1, seed=2)
        x = NodeSignal(np.arange(8.0) ** 2)
        pooled = pool(permute_signal(x, h), 2)
        for c in range(4):
            a, b = h.perm[2 * c], h.perm[2 * c + 1]
            expected = max(x.values[a, 0], x.values[b, 0])
            assert pooled.values[c, 0] == expected


class TestPool:
    def test_hand_example(self):
        x = NodeSignal(np.array([1.0, 5.0, 3.0, 2.0]))
        np.testing.assert_array_equal(pool(x, 2).values, [[5.0], [3.0]])

    def test_multichannel_independent(self):
        x = NodeSignal(np.array([[1.0, 9.0], [2.0, 8.0],
                                 [7.0, 0.0], [6.0, 4.0]]))
        np.testing.assert_array_equal(pool(x, 2).values,
                                      [[2.0, 9.0], [7.0, 4.0]])

    def test_factor_one_is_identity(self):
        x = NodeSignal(np.array([3.0, 1.0]))
        np.testing.assert_array_equal(pool(x, 1).values, x.values)

    def test_rejects_indivisible_length(self):
        with pytest.raises(DimensionError):
            pool(NodeSignal(np.ones(5)), 2)

    def test_rejects_nonpositive_factor(self):
        with pytest.raises(ValidationError):
            pool(NodeSignal(np.ones(4)), 0)


class TestHierarchyJson:
    def test_metadata_round_trip(self, tmp_path):
        h = build_hierarchy(complete_graph(8), n_levels=2, seed=0)
        path = tmp_path / "hierarchy.json"
        write_hierarchy_json(h, path)
        with open(path) as fh:
            meta = json.load(fh)
        assert meta["schema_version"] == 1
        assert meta["n_real"] == 8
        assert tuple(meta["level_sizes"]) == h.level_sizes
        assert tuple(meta["fake_counts"]) == h.fake_counts
        assert meta["perm"] == h.perm.tolist()
        assert meta["parents"] == [p.tolist() for p in h.parents]
