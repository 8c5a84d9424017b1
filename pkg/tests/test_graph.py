import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lstmlayout.generators import gen_grid, gen_star
from lstmlayout.graph import (Graph, GraphError, bfs_order, bfs_width_bound, encode_adjacency_vectors,
                              is_connected, skip_predecessors, validate_graph, wl_hash)


def path(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


@st.composite
def connected_graphs(draw, max_n=50):
    n = draw(st.integers(1, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    edges = {(int(rng.integers(i)), i) for i in range(1, n)}  # random spanning tree
    extra = draw(st.integers(0, 2 * n))
    for _ in range(extra):
        u, v = rng.integers(n, size=2)
        if u != v:
            edges.add((int(min(u, v)), int(max(u, v))))
    return Graph.from_edges(n, sorted(edges))


def test_graph_rejects_bad_edges():
    with pytest.raises(GraphError, match="self-loop"):
        Graph.from_edges(2, [(0, 0), (0, 1)])
    with pytest.raises(GraphError, match="duplicate"):
        Graph.from_edges(2, [(0, 1), (1, 0)])
    with pytest.raises(GraphError):
        Graph.from_edges(2, [(0, 2)])
    with pytest.raises(GraphError):
        Graph.from_edges(3, [(0, 1), (1, 2)], communities=[0, 1])


def test_bfs_order_examples():
    assert bfs_order(path(3), 0) == (0, 1, 2)
    star = Graph.from_edges(5, [(4, i) for i in range(4)])
    assert bfs_order(star, 4) == (4, 0, 1, 2, 3)


def test_bfs_levels_sorted_by_degree_on_grid():
    g = gen_grid(3, 3)
    order = bfs_order(g, 0)
    # levels from corner 0: {0}, {1,3}, {2,4,6}, {5,7}, {8}
    assert order == (0, 1, 3, 4, 2, 6, 5, 7, 8)
    deg = g.degrees
    for level in ([1, 3], [4, 2, 6], [5, 7]):
        idx = [order.index(v) for v in level]
        seq = [deg[order[i]] for i in sorted(idx)]
        assert seq == sorted(seq, reverse=True)


def test_bfs_disconnected_names_unreached_count():
    g = Graph.from_edges(4, [(0, 1), (2, 3)])
    with pytest.raises(GraphError, match="2 node"):
        bfs_order(g, 0)


def test_encode_examples():
    tri = Graph.from_edges(3, [(0, 1), (0, 2), (1, 2)])
    seq = encode_adjacency_vectors(tri, [0, 1, 2], 2)
    np.testing.assert_array_equal(seq.vectors, [[0, 0], [1, 0], [1, 1]])
    seq = encode_adjacency_vectors(path(3), [0, 1, 2], 1)
    np.testing.assert_array_equal(seq.vectors, [[0], [1], [1]])


def test_encode_truncates_star_window():
    g = gen_star(6)
    seq = encode_adjacency_vectors(g, bfs_order(g, 0), 3)
    zero_rows = [i for i in range(g.n) if not seq.vectors[i].any()]
    assert zero_rows == [0, 4, 5, 6]


def test_width_bound_examples():
    assert bfs_width_bound(path(6), bfs_order(path(6), 0)) == 1
    s = gen_star(7)
    assert bfs_width_bound(s, bfs_order(s, 0)) == 7
    g = gen_grid(4, 4)
    assert bfs_width_bound(g, bfs_order(g, 0)) == 4


@settings(max_examples=60, deadline=None)
@given(connected_graphs(), st.data())
def test_encoding_properties(g, data):
    start = data.draw(st.integers(0, g.n - 1))
    order = bfs_order(g, start)
    assert sorted(order) == list(range(g.n))
    assert order == bfs_order(g, start)
    m = bfs_width_bound(g, order)
    pos = {v: i for i, v in enumerate(order)}
    for u, v in g.edges:
        assert abs(pos[u] - pos[v]) <= 2 * m
    seq = encode_adjacency_vectors(g, order, max(g.n - 1, 1))
    assert not seq.vectors[0].any()
    rebuilt = set()
    for i in range(g.n):
        for j in np.nonzero(seq.vectors[i])[0]:
            a, b = order[i], order[i - j - 1]
            rebuilt.add((min(a, b), max(a, b)))
    assert rebuilt == set(g.edges)
    for i, ps in enumerate(skip_predecessors(g, order)):
        assert all(p < i - 1 and g.has_edge(order[p], order[i]) for p in ps)


@settings(max_examples=15, deadline=None)
@given(connected_graphs(max_n=25), st.integers(0, 2**32 - 1))
def test_wl_hash_relabel_invariant(g, seed):
    rng = np.random.default_rng(seed)
    h = wl_hash(g)
    for _ in range(100):
        assert wl_hash(g.relabel(rng.permutation(g.n))) == h


def test_wl_hash_examples():
    t1 = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    t2 = t1.relabel([2, 0, 1])
    assert wl_hash(t1) == wl_hash(t2)
    assert wl_hash(t1) != wl_hash(path(3))
    c6 = Graph.from_edges(6, [(i, (i + 1) % 6) for i in range(6)])
    two_c3 = Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    # 1-WL cannot separate regular graphs of equal degree
    assert wl_hash(c6) == wl_hash(two_c3)


def test_validate_graph():
    assert validate_graph(Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])) == []
    loop = Graph(2, ((0, 0), (0, 1)))
    assert any("self-loop" in p for p in validate_graph(loop))
    two = Graph(4, ((0, 1), (2, 3)))
    assert any("disconnected" in p for p in validate_graph(two))
    assert not is_connected(two)
