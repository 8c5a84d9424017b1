import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lstmlayout.autodiff import gradient_check
from lstmlayout.procrustes import (DegenerateLayoutError, ProcrustesSmoothingWarning, center, procrustes_align,
                                   procrustes_backward, procrustes_loss, procrustes_statistic)


def rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def eig_oracle(c, d):
    c = c - c.mean(axis=0)
    d = d - d.mean(axis=0)
    m = c.T @ d @ d.T @ c
    t = np.sqrt(np.clip(np.linalg.eigvalsh(m), 0, None)).sum()
    return 1 - t * t / (np.trace(c.T @ c) * np.trace(d.T @ d))


def test_center_examples():
    np.testing.assert_array_equal(center([[1, 1], [3, 3]]), [[-1, -1], [1, 1]])
    c = np.array([[-1.0, 2.0], [1.0, -2.0]])
    np.testing.assert_array_equal(center(c), c)
    np.testing.assert_array_equal(center([[2.5, 1.0]] * 4), np.zeros((4, 2)))


def test_identity_and_similarity():
    rng = np.random.default_rng(0)
    c = rng.normal(size=(10, 2))
    assert procrustes_statistic(c, c) <= 1e-15
    d = 3.7 * c @ rot(1.1).T + [5, -2]
    assert procrustes_statistic(c, d) <= 1e-9


def test_right_triangle_constant():
    # eigen-decomposition oracle gives 3/16
    c = np.array([[0, 0], [1, 0], [0, 1.0]])
    d = np.array([[0, 0], [2, 0], [1, 1.0]])
    assert abs(eig_oracle(c, d) - 0.1875) < 1e-14
    assert abs(procrustes_statistic(c, d) - 0.1875) < 1e-15


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_matches_oracle_symmetric_and_in_range(n, seed):
    rng = np.random.default_rng(seed)
    c, d = rng.normal(size=(n, 2)), rng.normal(size=(n, 2)) * rng.uniform(0.1, 100)
    r = procrustes_statistic(c, d)
    assert 0.0 <= r <= 1.0
    assert abs(r - procrustes_statistic(d, c)) <= 1e-10
    # the eigen oracle loses ~sqrt(eps) when M is nearly singular
    assert abs(r - eig_oracle(c, d)) <= 1e-7


def test_degenerate_inputs():
    with pytest.raises(DegenerateLayoutError, match="degenerate layout"):
        procrustes_statistic(np.ones((5, 2)), np.random.default_rng(0).normal(size=(5, 2)))
    with pytest.raises(DegenerateLayoutError):
        procrustes_statistic([[0.0, 0.0]], [[1.0, 1.0]])
    with pytest.raises(ValueError):
        procrustes_statistic(np.zeros((3, 2)), np.zeros((4, 2)))


def test_gradient_zero_at_match_and_along_invariances():
    rng = np.random.default_rng(1)
    c = rng.normal(size=(7, 2))
    np.testing.assert_allclose(procrustes_backward(c, c), 0.0, atol=1e-14)
    d = rng.normal(size=(7, 2))
    g = procrustes_backward(c, d)
    cc = c - c.mean(axis=0)
    assert abs(np.sum(g * cc)) <= 1e-12 * np.abs(g).sum()  # scaling direction
    assert np.allclose(g.sum(axis=0), 0.0, atol=1e-14)  # translation
    assert abs(np.sum(g * (cc @ rot(np.pi / 2).T))) <= 1e-12 * np.abs(g).sum()  # rotation


def test_gradient_matches_finite_differences():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        d = rng.normal(size=(5, 2))

        def f(c):
            return procrustes_loss(c, d)

        assert gradient_check(f, {"c": rng.normal(size=(5, 2))}, h=1e-6) < 1e-5


def test_smoothing_is_flagged():
    c = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    d = np.array([[0.0, 0.0], [0.0, 1.0], [0.0, 2.0]])
    with pytest.warns(ProcrustesSmoothingWarning):
        g = procrustes_backward(c, d)
    assert np.all(np.isfinite(g))


def test_align_recovers_transform():
    rng = np.random.default_rng(2)
    c = rng.normal(size=(8, 2))
    d = 2.0 * c @ rot(np.pi / 2).T
    a = procrustes_align(c, d)
    assert abs(a.scale - 2.0) < 1e-12
    np.testing.assert_allclose(a.rotation, rot(np.pi / 2), atol=1e-12)
    np.testing.assert_allclose(a.aligned, d, atol=1e-12)
    ident = procrustes_align(c, c)
    np.testing.assert_allclose(ident.rotation, np.eye(2), atol=1e-12)
    assert abs(ident.scale - 1) < 1e-12 and np.allclose(ident.translation, 0, atol=1e-12)


def test_align_residual_equals_statistic():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        c, d = rng.normal(size=(9, 2)), rng.normal(size=(9, 2)) * 5 + 3
        a = procrustes_align(c, d)
        dc = d - d.mean(axis=0)
        assert abs(a.residual / np.sum(dc * dc) - procrustes_statistic(c, d)) <= 1e-8
        np.testing.assert_allclose(a.apply(c), a.aligned)


def test_align_allows_reflection():
    rng = np.random.default_rng(3)
    c = rng.normal(size=(6, 2))
    d = c * [1, -1]
    a = procrustes_align(c, d)
    assert np.linalg.det(a.rotation) < 0
    assert a.residual < 1e-20
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert procrustes_statistic(c, d) <= 1e-12
