import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvdopt.topology import (
    Graph,
    build_schedule,
    complete_graph,
    empty_graph,
    metropolis_weights,
    path_graph,
    read_graph_list,
    verify_assumption,
    window_delta,
    window_product,
    write_graph_list,
)


def test_graph_rejects_self_loops_and_out_of_range():
    with pytest.raises(ValueError):
        Graph.from_edges(3, [(1, 1)])
    with pytest.raises(ValueError):
        Graph.from_edges(3, [(0, 3)])


def test_graph_normalizes_edge_orientation():
    g = Graph.from_edges(3, [(2, 0), (0, 2)])
    assert g.edges == frozenset({(0, 2)})


def test_metropolis_path3():
    W = metropolis_weights(path_graph(3))
    expected = np.array([[2, 1, 0], [1, 1, 1], [0, 1, 2]]) / 3
    np.testing.assert_allclose(W, expected, atol=1e-15)


def test_metropolis_single_edge_on_three_nodes():
    W = metropolis_weights(Graph.from_edges(3, [(0, 1)]))
    expected = np.array([[0.5, 0.5, 0], [0.5, 0.5, 0], [0, 0, 1]])
    np.testing.assert_allclose(W, expected, atol=1e-15)


@pytest.mark.parametrize("n", [2, 3, 7, 25])
def test_metropolis_complete_is_exact_averaging(n):
    np.testing.assert_allclose(metropolis_weights(complete_graph(n)), np.full((n, n), 1 / n), atol=1e-15)


def test_metropolis_isolated_nodes_get_identity_rows():
    np.testing.assert_array_equal(metropolis_weights(empty_graph(4)), np.eye(4))


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 12))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return Graph.from_edges(n, chosen)


@given(graphs())
@settings(max_examples=200, deadline=None)
def test_metropolis_symmetric_doubly_stochastic_and_sparse(g):
    W = metropolis_weights(g)
    assert np.array_equal(W, W.T)
    np.testing.assert_allclose(W.sum(axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(W >= 0)
    for i in range(g.n):
        for j in range(g.n):
            if i != j and not g.has_edge(i, j):
                assert W[i, j] == 0.0


def test_build_schedule_rejects_small_n():
    with pytest.raises(ValueError):
        build_schedule("fixed", 1)


def test_fixed_complete_schedule():
    s = build_schedule("fixed", 3, graph=complete_graph(3))
    for k in (0, 1, 17):
        np.testing.assert_allclose(s.matrix(k), np.full((3, 3), 1 / 3), atol=1e-15)


def test_alternating_schedule_alternates(alternating3):
    W0 = metropolis_weights(Graph.from_edges(3, [(0, 1)]))
    W1 = metropolis_weights(Graph.from_edges(3, [(1, 2)]))
    for k in range(6):
        np.testing.assert_array_equal(alternating3.matrix(k), W0 if k % 2 == 0 else W1)


def test_alternating_rejects_disconnected_window():
    graphs = [Graph.from_edges(3, [(0, 1)]), Graph.from_edges(3, [(0, 1)])]
    with pytest.raises(ValueError, match="disconnected"):
        build_schedule("alternating", 3, graphs=graphs, B=2)
    # window too short to connect even a good list
    good = [Graph.from_edges(3, [(0, 1)]), Graph.from_edges(3, [(1, 2)])]
    with pytest.raises(ValueError):
        build_schedule("alternating", 3, graphs=good, B=1)


def test_random_gilbert_is_deterministic():
    a = build_schedule("random-gilbert", 10, seed=7, p=0.3)
    b = build_schedule("random-gilbert", 10, seed=7, p=0.3)
    # request in different orders
    for k in (40, 3, 0, 25):
        b.matrix(k)
    for k in range(50):
        np.testing.assert_array_equal(a.matrix(k), b.matrix(k))
    c = build_schedule("random-gilbert", 10, seed=8, p=0.3)
    assert any(not np.array_equal(a.matrix(k), c.matrix(k)) for k in range(50))


@pytest.mark.parametrize("B,period", [(1, 1), (2, 1), (3, 2), (4, 3), (2, 5)])
def test_random_gilbert_windows_are_connected(B, period):
    s = build_schedule("random-gilbert", 12, seed=1, p=0.12, period=period, B=B)
    for k in range(B - 1, 120):
        union = Graph(12)
        for t in range(k - B + 1, k + 1):
            union = union.union(s.graph(t))
        assert union.is_connected(), k


def test_random_gilbert_validates_params():
    with pytest.raises(ValueError):
        build_schedule("random-gilbert", 5, p=0.0)
    with pytest.raises(ValueError):
        build_schedule("random-gilbert", 5, p=0.5, period=0)
    with pytest.raises(ValueError):
        build_schedule("random-gilbert", 5)


def test_schedule_is_thread_safe():
    s = build_schedule("random-gilbert", 8, seed=3, p=0.3, B=2)
    reference = build_schedule("random-gilbert", 8, seed=3, p=0.3, B=2)
    out = {}

    def worker(start):
        out[start] = [s.matrix(k).copy() for k in range(start, 200, 4)]

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for start, mats in out.items():
        for k, W in zip(range(start, 200, 4), mats):
            np.testing.assert_array_equal(W, reference.matrix(k))


def test_window_product_edge_cases(alternating3):
    np.testing.assert_array_equal(window_product(alternating3, 5, 0), np.eye(3))
    np.testing.assert_array_equal(window_product(alternating3, 4, 1), alternating3.matrix(4))
    with pytest.raises(ValueError):
        window_product(alternating3, 0, 2)


def test_window_product_alternating_explicit(alternating3):
    # W(1) W(0) multiplied out by hand
    expected = np.array([[0.5, 0.5, 0.0], [0.25, 0.25, 0.5], [0.25, 0.25, 0.5]])
    P = window_product(alternating3, 1, 2)
    np.testing.assert_allclose(P, expected, atol=1e-15)
    np.testing.assert_allclose(P.sum(axis=0), 1.0, atol=1e-15)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-15)


def test_window_delta_examples():
    assert window_delta(np.full((4, 4), 0.25)) == pytest.approx(0.0, abs=1e-15)
    assert window_delta(np.eye(5)) == pytest.approx(1.0, abs=1e-14)
    W = metropolis_weights(path_graph(3))
    # oracle: W is symmetric, so the deflated norm is the second-largest |eigenvalue|
    eig = np.sort(np.abs(np.linalg.eigvalsh(W)))
    assert eig[-2] == pytest.approx(2 / 3, abs=1e-14)
    assert window_delta(W) == pytest.approx(eig[-2], abs=1e-14)
    with pytest.raises(ValueError):
        window_delta(np.ones((2, 3)))


def test_window_delta_transpose_invariant(random10):
    for k in range(1, 30):
        P = window_product(random10, k, 2)
        assert window_delta(P) == pytest.approx(window_delta(P.T), abs=1e-12)


def test_window_products_doubly_stochastic(random10, alternating3):
    for s in (random10, alternating3):
        for b in range(0, 6):
            for k in range(max(b - 1, 0), 40):
                P = window_product(s, k, b)
                np.testing.assert_allclose(P.sum(axis=0), 1.0, atol=1e-10)
                np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-10)


def test_verify_assumption_examples(alternating3):
    s = build_schedule("fixed", 3, graph=complete_graph(3))
    rep = verify_assumption(s, B=1)
    assert rep.delta_hat == pytest.approx(0.0, abs=1e-14)
    assert rep.passed

    rep = verify_assumption(build_schedule("fixed", 2, graph=empty_graph(2)), B=1)
    assert rep.delta_hat == pytest.approx(1.0, abs=1e-14)
    assert not rep.passed
    assert rep.sparsity_violations == []

    rep = verify_assumption(alternating3, B=2, horizon=20)
    # oracle: deflated singular value from the eigenvalues of M^T M
    M = window_product(alternating3, 1, 2) - 1 / 3
    oracle = np.sqrt(np.linalg.eigvalsh(M.T @ M).max())
    assert rep.delta_hat == pytest.approx(oracle, abs=1e-12)
    assert rep.delta_hat < 1
    assert rep.passed
    assert rep.horizon == 20
    assert len(rep.window_deltas) == 19


def test_verify_assumption_rejects_short_horizon(alternating3):
    with pytest.raises(ValueError):
        verify_assumption(alternating3, B=2, horizon=1)


def test_verify_assumption_reports_sparsity_violation():
    class Leaky(type(build_schedule("fixed", 3))):
        def matrix(self, k):
            return np.full((3, 3), 1 / 3)

    s = Leaky(Graph.from_edges(3, [(0, 1), (1, 2)]))
    rep = verify_assumption(s, B=1, horizon=2)
    assert (0, 0, 2) in rep.sparsity_violations
    assert rep.max_residual <= 1e-15


def test_window_delta_submultiplicative(random10):
    B, horizon = 2, 60
    rep = verify_assumption(random10, B, horizon)
    for m in range(1, 6):
        for k in range(m * B - 1, horizon, 7):
            P = window_product(random10, k, m * B)
            assert window_delta(P) <= rep.delta_hat**m + 1e-9


def test_graph_list_round_trip(tmp_path):
    graphs = [Graph.from_edges(4, [(0, 1), (2, 3)]), Graph.from_edges(4, [(1, 2)])]
    path = tmp_path / "graphs.txt"
    write_graph_list(path, graphs)
    assert read_graph_list(path, 4) == graphs
    assert path.read_text() == "0 1\n2 3\n\n1 2\n"


def test_graph_list_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1\n1 x\n")
    with pytest.raises(ValueError, match=":2:"):
        read_graph_list(bad)
    bad.write_text("0 1 2\n")
    with pytest.raises(ValueError):
        read_graph_list(bad)
