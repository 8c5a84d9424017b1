"""Aesthetic metrics, RMSE aggregation and a CPU timing harness."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .graph import Graph

NODE_RADIUS = 8.0


class CollinearOverlapWarning(RuntimeWarning):
    pass


def _orient(ax, ay, bx, by, cx, cy):
    return np.sign((bx - ax) * (cy - ay) - (by - ay) * (cx - ax))


def _on_segment(px, py, ax, ay, bx, by):
    return ((np.minimum(ax, bx) <= px) & (px <= np.maximum(ax, bx))
            & (np.minimum(ay, by) <= py) & (py <= np.maximum(ay, by)))


def count_edge_crossings(g: Graph, layout) -> int:
    """Number of unordered edge pairs whose segments intersect.

    Pairs sharing an endpoint are never counted. Collinear overlapping
    segments count as a crossing and raise :class:`CollinearOverlapWarning`.
    """
    p = np.asarray(layout, dtype=np.float64)
    if g.m < 2:
        return 0
    e = np.array(g.edges)
    i, j = np.triu_indices(g.m, 1)
    a, b = e[i], e[j]
    keep = ((a[:, 0] != b[:, 0]) & (a[:, 0] != b[:, 1]) & (a[:, 1] != b[:, 0]) & (a[:, 1] != b[:, 1]))
    a, b = a[keep], b[keep]
    P1, P2, Q1, Q2 = p[a[:, 0]], p[a[:, 1]], p[b[:, 0]], p[b[:, 1]]
    o1 = _orient(*P1.T, *P2.T, *Q1.T)
    o2 = _orient(*P1.T, *P2.T, *Q2.T)
    o3 = _orient(*Q1.T, *Q2.T, *P1.T)
    o4 = _orient(*Q1.T, *Q2.T, *P2.T)
    proper = (o1 * o2 < 0) & (o3 * o4 < 0)
    touch = (((o1 == 0) & _on_segment(*Q1.T, *P1.T, *P2.T))
             | ((o2 == 0) & _on_segment(*Q2.T, *P1.T, *P2.T))
             | ((o3 == 0) & _on_segment(*P1.T, *Q1.T, *Q2.T))
             | ((o4 == 0) & _on_segment(*P2.T, *Q1.T, *Q2.T)))
    hits = proper | touch
    collinear = (o1 == 0) & (o2 == 0) & touch
    if collinear.any():
        warnings.warn(f"{int(collinear.sum())} collinear overlapping edge pair(s) counted as crossings",
                      CollinearOverlapWarning, stacklevel=2)
    return int(hits.sum())


def crossing_bound(g: Graph) -> int:
    """Edge pairs that could cross: C(m, 2) minus pairs sharing a node."""
    deg = g.degrees.astype(np.int64)
    return int(g.m * (g.m - 1) // 2 - (deg * (deg - 1) // 2).sum())


def metric_edge_crossing(g: Graph, layout) -> float:
    cmax = crossing_bound(g)
    if cmax <= 0:
        return 0.0
    return count_edge_crossings(g, layout) / cmax


def metric_node_occlusion(layout, radius: float = NODE_RADIUS) -> float:
    """Union area of equal node disks over their summed area.

    The union is rasterized on a grid of cell ``radius / 10`` with 4 x 4
    samples per cell, so the estimate is deterministic.
    """
    if radius <= 0:
        raise ValueError("radius must be > 0")
    p = np.asarray(layout, dtype=np.float64)
    n = len(p)
    if n == 0:
        return 1.0
    h = radius / 40.0
    lo = p.min(axis=0) - radius
    size = np.ceil((p.max(axis=0) + radius - lo) / h).astype(int) + 1
    grid = np.zeros((size[1], size[0]), dtype=bool)
    w = int(np.ceil(radius / h)) + 1
    off = np.arange(-w, w + 1)
    for cx, cy in p:
        ix = int(np.floor((cx - lo[0]) / h))
        iy = int(np.floor((cy - lo[1]) / h))
        xs = ix + off
        ys = iy + off
        xs = xs[(xs >= 0) & (xs < size[0])]
        ys = ys[(ys >= 0) & (ys < size[1])]
        sx = lo[0] + (xs + 0.5) * h - cx
        sy = lo[1] + (ys + 0.5) * h - cy
        inside = sy[:, None] ** 2 + sx[None, :] ** 2 <= radius * radius
        grid[ys[0]:ys[-1] + 1, xs[0]:xs[-1] + 1] |= inside
    union = grid.sum() * h * h
    value = union / (n * np.pi * radius * radius)
    return float(min(1.0, max(1.0 / n, value)))


def metric_community_overlap(g: Graph, layout, k_nn: int = 5) -> float:
    """Distance-weighted share of same-community pairs among k nearest neighbors.

    Weights are ``1 / (1 + d)`` with ``d`` measured in units of the layout's
    RMS radius, so the value does not change with the drawing's scale.
    """
    if g.communities is None:
        raise ValueError("graph has no community labels")
    if k_nn < 1:
        raise ValueError("k_nn must be >= 1")
    p = np.asarray(layout, dtype=np.float64)
    n = len(p)
    if n < 2:
        return 1.0
    comm = np.asarray(g.communities)
    c = p - p.mean(axis=0)
    spread = np.sqrt((c * c).sum(axis=1).mean())
    d = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(axis=2))
    d = d / spread if spread > 0 else d
    np.fill_diagonal(d, np.inf)
    k = min(k_nn, n - 1)
    nn = np.argsort(d, axis=1, kind="stable")[:, :k]
    dn = np.take_along_axis(d, nn, axis=1)
    w = 1.0 / (1.0 + dn)
    same = comm[nn] == comm[:, None]
    return float((w * same).sum() / w.sum())


def rmse(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("rmse needs at least one value")
    return float(np.sqrt(np.mean((a - b) ** 2)))


@dataclass
class MetricReport:
    generated: dict[str, list[float]] = field(default_factory=lambda: {"A_ec": [], "A_no": [], "A_co": []})
    truth: dict[str, list[float]] = field(default_factory=lambda: {"A_ec": [], "A_no": [], "A_co": []})
    timing: dict[str, list[float]] = field(default_factory=dict)
    meta: dict = field(default_factory=lambda: {"A_co": "kNN distance-weighted autocorrelation (reconstruction)"})

    def add(self, g: Graph, generated, truth, radius: float = NODE_RADIUS):
        for store, lay in ((self.generated, generated), (self.truth, truth)):
            store["A_ec"].append(metric_edge_crossing(g, lay))
            store["A_no"].append(metric_node_occlusion(lay, radius))
            if g.communities is not None:
                store["A_co"].append(metric_community_overlap(g, lay))

    def rmses(self) -> dict[str, float]:
        return {k: rmse(self.generated[k], self.truth[k]) for k in self.generated if self.generated[k]}

    def to_dict(self) -> dict:
        return {"generated": self.generated, "truth": self.truth, "rmse": self.rmses(),
                "timing": self.timing, "meta": self.meta}

    def to_text(self) -> str:
        lines = ["metric  mean(gen)  mean(truth)  rmse"]
        for k, v in self.rmses().items():
            lines.append(f"{k:6s}  {np.mean(self.generated[k]):9.4f}  {np.mean(self.truth[k]):11.4f}  {v:.4f}")
        for k, v in self.timing.items():
            if v:
                lines.append(f"time[{k}]  mean {np.mean(v):.4f}s over {len(v)} graphs")
        return "\n".join(lines)


def time_layout(method: Callable[[Graph], object], graphs: Sequence[Graph], repeats: int = 10) -> list[float]:
    """Mean wall-clock seconds per graph over ``repeats`` runs, single-threaded."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    out = []
    with threadpool_limits(limits=1):
        for g in graphs:
            t0 = time.perf_counter()
            for _ in range(repeats):
                method(g)
            out.append((time.perf_counter() - t0) / repeats)
    return out
