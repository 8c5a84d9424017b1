import numpy as np
import pytest

from lstmlayout.generators import clustered_preset, gen_grid, gen_star
from lstmlayout.graph import Graph
from lstmlayout.layouts import (Canvas, DegenerateLayoutWarning, Fa2Config, PmdsConfig, layout_forceatlas2,
                                layout_grid_perfect, layout_pivotmds, layout_star_perfect, normalize_to_canvas,
                                select_pivots)
from lstmlayout.procrustes import procrustes_statistic


def test_grid_perfect_examples():
    np.testing.assert_allclose(layout_grid_perfect(2, 2), [[40, 40], [760, 40], [40, 760], [760, 760]])
    np.testing.assert_allclose(layout_grid_perfect(3, 3)[4], [400, 400])
    g = gen_grid(4, 7)
    xy = layout_grid_perfect(4, 7)
    lengths = [np.linalg.norm(xy[u] - xy[v]) for u, v in g.edges]
    np.testing.assert_allclose(lengths, lengths[0])
    assert xy[:, 0].min() >= 40 and xy[:, 0].max() <= 760


def test_star_perfect_examples():
    xy = layout_star_perfect(4)
    np.testing.assert_allclose(xy[0], [400, 400])
    ang = np.degrees(np.arctan2(xy[1:, 1] - 400, xy[1:, 0] - 400)) % 360
    np.testing.assert_allclose(ang, [0, 90, 180, 270], atol=1e-9)
    for leaves in (1, 7, 30):
        xy = layout_star_perfect(leaves)
        r = np.linalg.norm(xy[1:] - xy[0], axis=1)
        np.testing.assert_allclose(r, r[0])
    one = layout_star_perfect(1)
    assert one[1, 1] == 400 and one[1, 0] > 400


def test_pivotmds_path_is_collinear_and_flagged():
    g = Graph.from_edges(3, [(0, 1), (1, 2)])
    with pytest.warns(DegenerateLayoutWarning):
        xy = layout_pivotmds(g)
    centered = xy - xy.mean(axis=0)
    assert np.linalg.svd(centered, compute_uv=False)[1] < 1e-6


def test_pivotmds_k2_and_determinism():
    with pytest.warns(DegenerateLayoutWarning):
        xy = layout_pivotmds(Graph.from_edges(2, [(0, 1)]))
    assert not np.allclose(xy[0], xy[1])
    for g in clustered_preset(5, seed=4) + [gen_grid(5, 6)]:
        a, b = layout_pivotmds(g), layout_pivotmds(g)
        assert a.tobytes() == b.tobytes()


def test_pivot_selection():
    g = gen_star(5)
    pivots, dist = select_pivots(g, 3)
    assert pivots == [0, 1, 2]
    assert dist.shape == (6, 3)
    g = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    assert select_pivots(g, 3)[0] == [1, 4, 0]


def test_pivotmds_recovers_grid_shape():
    g = gen_grid(6, 6)
    with np.errstate(all="ignore"):
        xy = layout_pivotmds(g)
    assert procrustes_statistic(xy, layout_grid_perfect(6, 6)) < 0.05


def test_fa2_zero_iterations_returns_init():
    g = clustered_preset(1, seed=1)[0]
    init = layout_pivotmds(g)
    assert np.array_equal(layout_forceatlas2(g, init, Fa2Config(iterations=0)), init)


def test_fa2_triangle_is_equilateral():
    tri = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    out = layout_forceatlas2(tri, np.array([[0.0, 0.0], [10.0, 1.0], [3.0, 7.0]]))
    d = [np.linalg.norm(out[i] - out[j]) for i, j in tri.edges]
    assert (max(d) - min(d)) / np.mean(d) < 0.01


@pytest.mark.parametrize("leaves", [4, 9, 12, 30, 60, 208])
def test_fa2_star_keeps_common_radius(leaves):
    g = gen_star(leaves)
    out = layout_forceatlas2(g, layout_star_perfect(leaves))
    r = np.linalg.norm(out[1:] - out[0], axis=1)
    assert (r.max() - r.min()) / r.mean() < 0.05


def test_fa2_handles_coincident_init_deterministically():
    g = clustered_preset(1, seed=2)[0]
    init = np.zeros((g.n, 2))
    a = layout_forceatlas2(g, init, Fa2Config(iterations=50))
    b = layout_forceatlas2(g, init, Fa2Config(iterations=50))
    assert np.all(np.isfinite(a)) and a.tobytes() == b.tobytes()
    assert len(np.unique(a.round(6), axis=0)) == g.n


def test_fa2_converges_over_last_steps():
    for g in clustered_preset(6, seed=5) + [gen_grid(10, 12)]:
        trace = []
        layout_forceatlas2(g, layout_pivotmds(g), trace=trace)
        assert len(trace) == 700
        tail = np.array(trace[-100:])
        assert (np.diff(tail) > 0).mean() <= 0.05
        assert trace[-1] < trace[0]


def test_fa2_config_validation():
    with pytest.raises(ValueError):
        Fa2Config(scaling=0)
    with pytest.raises(ValueError):
        Fa2Config(iterations=-1)
    with pytest.raises(ValueError):
        layout_forceatlas2(gen_star(3), np.zeros((3, 2)))


def test_normalize_examples():
    c = Canvas(800, 800, 0)
    np.testing.assert_allclose(normalize_to_canvas([[0, 0], [1, 1]], c), [[0, 0], [800, 800]])
    full = np.array([[40.0, 40.0], [760.0, 760.0], [100.0, 500.0]])
    np.testing.assert_allclose(normalize_to_canvas(full), full, atol=1e-12)
    with pytest.warns(DegenerateLayoutWarning):
        out = normalize_to_canvas(np.ones((4, 2)) * 3)
    np.testing.assert_array_equal(out, np.full((4, 2), 400.0))


def test_normalize_fits_and_preserves_shape():
    rng = np.random.default_rng(0)
    for _ in range(20):
        lay = rng.normal(size=(30, 2)) * rng.uniform(0.01, 1000) + rng.normal(size=2) * 50
        out = normalize_to_canvas(lay)
        assert out.min() >= 40 - 1e-9 and out.max() <= 760 + 1e-9
        assert procrustes_statistic(lay, out) <= 1e-6


def test_bfs_distances_match_networkx():
    import networkx as nx

    from lstmlayout.layouts import bfs_distances

    for g in clustered_preset(3, seed=9) + [gen_grid(4, 5)]:
        ref = dict(nx.all_pairs_shortest_path_length(nx.Graph(list(g.edges))))
        for s in (0, g.n - 1):
            d = bfs_distances(g, s)
            assert [d[v] for v in range(g.n)] == [ref[s][v] for v in range(g.n)]
