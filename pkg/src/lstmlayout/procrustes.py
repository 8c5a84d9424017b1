"""Procrustes statistic between two drawings of the same graph.

For centered coordinate matrices ``C`` and ``D`` (n x 2) the statistic is

    R2 = 1 - tr((C^T D D^T C)^(1/2))^2 / (tr(C^T C) tr(D^T D))

With ``A = D^T C`` the 2x2 matrix ``M = A^T A`` has
``tr(M^(1/2)) = sqrt(tr(M) + 2 sqrt(det(M)))`` and ``sqrt(det(M)) = |det(A)|``,
so no general matrix square root is needed. The value is 0 for drawings
related by translation, rotation, reflection and uniform scaling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .autodiff import Var, _emit, _val

EPS_TRACE = 1e-9
EPS_DET = 1e-12


class DegenerateLayoutError(ValueError):
    pass


class ProcrustesSmoothingWarning(RuntimeWarning):
    """The determinant term was smoothed near its non-differentiable point."""


def center(c) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    return c - c.mean(axis=0, keepdims=True)


def _parts(c: np.ndarray, d: np.ndarray):
    if c.shape != d.shape or c.ndim != 2 or c.shape[1] != 2:
        raise ValueError(f"coordinate shapes must match and be (n, 2): {c.shape} vs {d.shape}")
    if c.shape[0] < 2:
        raise DegenerateLayoutError("degenerate layout: need at least 2 points")
    cc = c - c.mean(axis=0)
    dc = d - d.mean(axis=0)
    a = float(np.sum(cc * cc))
    b = float(np.sum(dc * dc))
    if a <= EPS_TRACE or b <= EPS_TRACE:
        raise DegenerateLayoutError("degenerate layout: all points coincide after centering")
    return cc, dc, a, b


def _statistic(cc, dc, a, b):
    A = dc.T @ cc
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    tr_m = float(np.sum(A * A))
    # smoothing threshold is applied to det(M) of the unit-trace drawings
    detn = det / (a * b)
    smoothed = detn * detn < EPS_DET
    rootn = np.sqrt(detn * detn + EPS_DET) if smoothed else abs(detn)
    num = tr_m + 2.0 * rootn * a * b
    return 1.0 - num / (a * b), A, detn / rootn, num, smoothed


def procrustes_statistic(c, d) -> float:
    """Shape difference in ``[0, 1]`` between two (n, 2) drawings.

    Reductions run in extended precision; the result is rounded once to
    float64. This keeps the value flat to within an ulp under exact
    similarity transforms, which finite-difference checks rely on.
    """
    _parts(np.asarray(c, dtype=np.float64), np.asarray(d, dtype=np.float64))
    c = np.asarray(c, dtype=np.longdouble)
    d = np.asarray(d, dtype=np.longdouble)
    cc = c - c.mean(axis=0)
    dc = d - d.mean(axis=0)
    a = np.sum(cc * cc)
    b = np.sum(dc * dc)
    A = dc.T @ cc
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    r2 = (a * b - np.sum(A * A) - 2 * abs(det)) / (a * b)
    return float(min(1.0, max(0.0, float(r2))))


def procrustes_backward(c, d, upstream: float = 1.0) -> np.ndarray:
    """Gradient of the statistic with respect to the first drawing ``c``."""
    c = np.asarray(c, dtype=np.float64)
    cc, dc, a, b = _parts(c, np.asarray(d, dtype=np.float64))
    _, A, ddet, num, smoothed = _statistic(cc, dc, a, b)
    if smoothed:
        warnings.warn("det(M) below 1e-12; smoothing the inner square root",
                      ProcrustesSmoothingWarning, stacklevel=2)
    cof = np.array([[A[1, 1], -A[1, 0]], [-A[0, 1], A[0, 0]]])
    g_num = dc @ (2.0 * A + 2.0 * ddet * cof)
    g = -g_num / (a * b) + (num / (a * a * b)) * 2.0 * cc
    g = g - g.mean(axis=0)
    return upstream * g


def procrustes_loss(pred, target) -> Var:
    """Statistic as a recorded primitive; gradients flow into ``pred`` only."""
    pv = _val(pred)
    tv = np.asarray(_val(target), dtype=np.float64)
    value = np.asarray(procrustes_statistic(pv, tv))
    return _emit(value, (pred,), lambda g: (procrustes_backward(pv, tv, float(g)).astype(pv.dtype),))


@dataclass(frozen=True)
class Alignment:
    """Similarity transform ``x -> scale * rotation @ x + translation``.

    ``rotation`` is orthogonal and may contain a reflection.
    """

    rotation: np.ndarray
    scale: float
    translation: np.ndarray
    aligned: np.ndarray
    residual: float

    def apply(self, c) -> np.ndarray:
        return self.scale * np.asarray(c) @ self.rotation.T + self.translation


def procrustes_align(c, d) -> Alignment:
    """Best similarity transform carrying drawing ``c`` onto drawing ``d``."""
    c = np.asarray(c, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    cc, dc, a, _ = _parts(c, d)
    u, s, vt = np.linalg.svd(cc.T @ dc)
    r_row = u @ vt  # row convention: cc @ r_row ~ dc
    scale = float(s.sum() / a)
    rotation = r_row.T
    translation = d.mean(axis=0) - scale * c.mean(axis=0) @ rotation.T
    aligned = scale * c @ rotation.T + translation
    residual = float(np.sum((aligned - d) ** 2))
    return Alignment(rotation, scale, translation, aligned, residual)
