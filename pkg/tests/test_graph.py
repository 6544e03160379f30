import numpy as np
import pytest
import scipy.sparse as sp

from gflin.errors import ConfigError, DataError
from gflin.graph import build_graph, is_connected_non_bipartite, normalize


def random_graph(rng, n, p=0.4):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return build_graph(edges, rng.normal(size=(n, 3)))


class TestBuildGraph:
    def test_empty_edge_list(self):
        g = build_graph([], np.zeros((2, 1)))
        assert g.num_nodes == 2
        assert g.adjacency.nnz == 0

    def test_symmetry_forced(self):
        g = build_graph([(0, 1)], np.zeros((2, 1)))
        assert g.adjacency[0, 1] == 1.0
        assert g.adjacency[1, 0] == 1.0
        assert g.adjacency.nnz == 2

    def test_duplicate_edges_collapse(self):
        g = build_graph([(0, 1), (1, 0), (0, 1)], np.zeros((2, 1)))
        assert g.adjacency.nnz == 2
        assert g.adjacency.max() == 1.0
        assert g.edge_pairs() == [(0, 1)]

    def test_out_of_range_index(self):
        with pytest.raises(DataError, match="out of range"):
            build_graph([(0, 5)], np.zeros((2, 1)))

    def test_feature_row_mismatch_is_out_of_range(self):
        # 3 nodes of edges against a 2-row feature matrix
        with pytest.raises(DataError):
            build_graph([(0, 2)], np.zeros((2, 1)))

    def test_self_loop_rejected(self):
        with pytest.raises(DataError, match="self-loop"):
            build_graph([(1, 1)], np.zeros((2, 1)))

    def test_features_are_read_only(self):
        g = build_graph([], np.zeros((2, 1)))
        with pytest.raises(ValueError):
            g.features[0, 0] = 1.0

    def test_hash_distinguishes_graphs(self):
        a = build_graph([(0, 1)], np.zeros((3, 1)))
        b = build_graph([(0, 2)], np.zeros((3, 1)))
        c = build_graph([(0, 1)], np.zeros((3, 1)))
        assert a.graph_hash != b.graph_hash
        assert a.graph_hash == c.graph_hash


class TestNormalize:
    def test_edgeless_symmetric_is_identity(self):
        g = build_graph([], np.zeros((2, 1)))
        m = normalize(g, "symmetric").matrix.toarray()
        np.testing.assert_array_equal(m, np.eye(2))

    def test_single_edge_symmetric(self):
        g = build_graph([(0, 1)], np.zeros((2, 1)))
        m = normalize(g, "symmetric").matrix.toarray()
        np.testing.assert_allclose(m, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)

    def test_triangle_row_uniform(self, triangle):
        m = normalize(triangle, "row").matrix.toarray()
        np.testing.assert_allclose(m, np.full((3, 3), 1.0 / 3.0), atol=1e-15)
        np.testing.assert_allclose(m.sum(axis=1), 1.0, atol=1e-12)

    def test_unknown_kind(self, triangle):
        with pytest.raises(ConfigError):
            normalize(triangle, "spectral")

    def test_symmetric_is_numerically_symmetric(self):
        rng = np.random.default_rng(3)
        for n in (2, 5, 9, 14):
            m = normalize(random_graph(rng, n), "symmetric").matrix.toarray()
            assert np.abs(m - m.T).max() < 1e-14

    def test_row_sums_are_one(self):
        rng = np.random.default_rng(4)
        for n in (2, 5, 9, 14):
            m = normalize(random_graph(rng, n), "row").matrix
            ones = np.ones(n)
            assert np.abs(m @ ones - ones).max() < 1e-12

    def test_row_spectrum_bounded_with_top_eigenvector_ones(self):
        rng = np.random.default_rng(5)
        for n in (3, 6, 10):
            # a path backbone keeps the graph connected, so eigenvalue 1 is simple
            edges = [(i, i + 1) for i in range(n - 1)]
            edges += [(i, j) for i in range(n) for j in range(i + 2, n) if rng.random() < 0.4]
            g = build_graph(edges, rng.normal(size=(n, 3)))
            m = normalize(g, "row").matrix.toarray()
            eigvals = np.linalg.eigvals(m)
            assert np.abs(eigvals).max() <= 1.0 + 1e-12
            # power iteration converges to the all-ones direction
            v = rng.normal(size=n) + 2.0
            for _ in range(200):
                v = m @ v
                v /= np.linalg.norm(v)
            assert np.abs(v - v.mean()).max() < 1e-6

    def test_sparsity_pattern_matches_self_loop_augmentation(self, triangle):
        adj = normalize(triangle, "symmetric").matrix
        expected = (triangle.adjacency + sp.identity(3, format="csr")).nnz
        assert adj.nnz == expected

    def test_raw_row_operator_without_self_loops(self, triangle):
        m = normalize(triangle, "row", self_loops=False).matrix.toarray()
        np.testing.assert_allclose(m, (np.ones((3, 3)) - np.eye(3)) / 2.0, atol=1e-15)

    def test_raw_row_operator_fixes_isolated_nodes(self):
        g = build_graph([], np.zeros((2, 1)))
        m = normalize(g, "row", self_loops=False).matrix.toarray()
        np.testing.assert_array_equal(m, np.eye(2))


class TestConnectivity:
    def test_triangle_is_connected_odd_cycle(self, triangle):
        assert is_connected_non_bipartite(triangle) == (True, False)

    def test_single_edge_two_colorable(self, single_edge):
        assert is_connected_non_bipartite(single_edge) == (True, True)

    def test_two_isolated_nodes(self):
        g = build_graph([], np.zeros((2, 1)))
        assert is_connected_non_bipartite(g) == (False, True)

    def test_even_cycle_bipartite(self):
        g = build_graph([(0, 1), (1, 2), (2, 3), (3, 0)], np.zeros((4, 1)))
        assert is_connected_non_bipartite(g) == (True, True)

    def test_disconnected_with_odd_component(self):
        edges = [(0, 1), (1, 2), (2, 0)]  # triangle plus one isolated node
        g = build_graph(edges, np.zeros((4, 1)))
        assert is_connected_non_bipartite(g) == (False, False)
