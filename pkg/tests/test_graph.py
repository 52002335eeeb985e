import numpy as np
import pytest

from udgnn.graph import (
    GraphError,
    ROW_NORM,
    SYM_NORM,
    SYM_NORM_SELF_LOOP,
    SparseGraph,
    build_propagation,
    spmm,
)


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    iu, iv = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    return SparseGraph.from_edges(n, np.stack([iu[keep], iv[keep]], axis=1))


def dense_spmm(p, h):
    # naive triple loop, the independent oracle
    d = p.to_dense()
    n, k = h.shape
    out = np.zeros((n, k))
    for i in range(n):
        for j in range(n):
            for c in range(k):
                out[i, c] += d[i, j] * h[j, c]
    return out


class TestBuildPropagation:
    def test_two_node_path_sym_norm(self):
        g = SparseGraph.from_edges(2, [[0, 1]])
        p = build_propagation(g, SYM_NORM)
        assert p.to_dense() == pytest.approx(np.array([[0, 1], [1, 0]]))

    def test_two_node_path_self_loop(self):
        g = SparseGraph.from_edges(2, [[0, 1]])
        p = build_propagation(g, SYM_NORM_SELF_LOOP)
        assert p.to_dense() == pytest.approx(np.full((2, 2), 0.5))

    def test_triangle_sym_norm(self):
        g = SparseGraph.from_edges(3, [[0, 1], [0, 2], [1, 2]])
        p = build_propagation(g, SYM_NORM)
        assert p.values == pytest.approx(0.5, abs=1e-15)

    def test_sym_norm_symmetric_exactly(self):
        g = random_graph(40, 0.15, seed=3)
        p = build_propagation(g, SYM_NORM)
        d = p.to_dense()
        assert np.array_equal(d, d.T)

    def test_row_norm_row_sums(self):
        g = random_graph(50, 0.1, seed=4)
        p = build_propagation(g, ROW_NORM)
        sums = p.apply(np.ones((50, 1))).ravel()
        deg = g.degrees()
        assert sums[deg > 0] == pytest.approx(1.0, abs=1e-12)
        assert np.all(sums[deg == 0] == 0.0)

    def test_isolated_node_zero_row_and_column(self):
        g = SparseGraph.from_edges(3, [[0, 1]])  # node 2 isolated
        for kind in (SYM_NORM, SYM_NORM_SELF_LOOP, ROW_NORM):
            d = build_propagation(g, kind).to_dense()
            assert np.all(d[2] == 0.0)
            if kind != ROW_NORM:
                assert np.all(d[:, 2] == 0.0)

    def test_empty_graph(self):
        g = SparseGraph.from_edges(0, [])
        p = build_propagation(g, SYM_NORM)
        assert p.n_nodes == 0

    def test_unknown_kind(self):
        g = SparseGraph.from_edges(2, [[0, 1]])
        with pytest.raises(GraphError, match="unknown propagation kind"):
            build_propagation(g, "Bogus")


class TestSpmm:
    def test_row_norm_triangle_averages(self):
        g = SparseGraph.from_edges(3, [[0, 1], [0, 2], [1, 2]])
        p = build_propagation(g, ROW_NORM)
        h = np.eye(3)
        out = spmm(p, h)
        expected = np.array([[0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]])
        assert out == pytest.approx(expected)

    def test_isolated_rows_zero(self):
        g = SparseGraph.from_edges(4, [[0, 1]])
        p = build_propagation(g, SYM_NORM)
        out = spmm(p, np.ones((4, 3)))
        assert np.all(out[2:] == 0.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_dense_brute_force(self, seed):
        g = random_graph(5, 0.6, seed=seed)
        p = build_propagation(g, SYM_NORM)
        h = np.random.default_rng(seed + 100).standard_normal((5, 4))
        out = spmm(p, h)
        expected = dense_spmm(p, h)
        assert np.max(np.abs(out - expected)) <= 1e-12 * max(1.0, np.max(np.abs(expected)))

    @pytest.mark.parametrize("kind", [SYM_NORM, SYM_NORM_SELF_LOOP, ROW_NORM])
    def test_matches_dense_larger(self, kind):
        g = random_graph(64, 0.1, seed=9)
        p = build_propagation(g, kind)
        h = np.random.default_rng(10).standard_normal((64, 8))
        rel = np.max(np.abs(spmm(p, h) - p.to_dense() @ h)) / max(1.0, np.max(np.abs(h)))
        assert rel < 1e-12

    def test_dimension_mismatch(self):
        g = SparseGraph.from_edges(3, [[0, 1]])
        p = build_propagation(g, SYM_NORM)
        with pytest.raises(GraphError):
            spmm(p, np.ones((4, 2)))

    def test_transpose_apply_row_norm(self):
        g = random_graph(20, 0.2, seed=5)
        p = build_propagation(g, ROW_NORM)
        h = np.random.default_rng(6).standard_normal((20, 3))
        assert p.transpose_apply(h) == pytest.approx(p.to_dense().T @ h)


class TestSparseGraph:
    def test_rejects_out_of_range_edge(self):
        with pytest.raises(GraphError, match="out of range"):
            SparseGraph.from_edges(3, [[5, 1]])

    def test_rejects_self_loop(self):
        with pytest.raises(GraphError, match="self-loop"):
            SparseGraph.from_edges(3, [[1, 1]])

    def test_rejects_duplicate_edge(self):
        with pytest.raises(GraphError, match="duplicate"):
            SparseGraph.from_edges(3, [[0, 1], [1, 0]])

    def test_edge_list_round_trip(self):
        g = random_graph(30, 0.2, seed=8)
        g2 = SparseGraph.from_edges(30, g.edge_list())
        assert np.array_equal(g.row_offsets, g2.row_offsets)
        assert np.array_equal(g.col_indices, g2.col_indices)

    def test_undirected_arcs_paired(self):
        g = random_graph(25, 0.3, seed=2)
        d = np.zeros((25, 25), dtype=bool)
        src = np.repeat(np.arange(25), g.degrees())
        d[src, g.col_indices] = True
        assert np.array_equal(d, d.T)
