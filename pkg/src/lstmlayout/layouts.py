"""Ground-truth layout engines: perfect grid/star, PivotMDS and ForceAtlas2."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .graph import Graph, GraphError


class DegenerateLayoutWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class Canvas:
    width: float = 800.0
    height: float = 800.0
    margin: float = 40.0

    @property
    def center(self) -> np.ndarray:
        return np.array([self.width / 2, self.height / 2])


@dataclass(frozen=True)
class Fa2Config:
    iterations: int = 700
    scaling: float = 2.0
    gravity: float = 1.0
    speed_tolerance: float = 1.0
    jitter_tolerance: float = 0.2
    cooling_steps: int = 100

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.scaling <= 0:
            raise ValueError("scaling must be > 0")
        if self.cooling_steps < 0:
            raise ValueError("cooling_steps must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PmdsConfig:
    pivots: int | None = None  # None: min(n, 12)
    power_iterations: int = 100
    strategy: str = "maxmin"

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- canvas

def normalize_to_canvas(coords, canvas: Canvas = Canvas()) -> np.ndarray:
    """Uniformly scale and translate so the bounding box fits inside the margins.

    The box is centered on the canvas and the aspect ratio is kept.
    """
    x = np.asarray(coords, dtype=np.float64)
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = hi - lo
    avail = np.array([canvas.width - 2 * canvas.margin, canvas.height - 2 * canvas.margin])
    if span.max() <= 0:
        warnings.warn("all points coincide; placing them at the canvas center", DegenerateLayoutWarning,
                      stacklevel=2)
        return np.tile(canvas.center, (len(x), 1))
    ratios = [a / s for a, s in zip(avail, span) if s > 0]
    s = min(ratios)
    mid = (lo + hi) / 2
    return (x - mid) * s + canvas.center


# ---------------------------------------------------------------- perfect layouts

def layout_grid_perfect(rows: int, cols: int, canvas: Canvas = Canvas()) -> np.ndarray:
    """Node ``r * cols + c`` on an evenly spaced lattice, columns along x."""
    step = min((canvas.width - 2 * canvas.margin) / max(cols - 1, 1),
               (canvas.height - 2 * canvas.margin) / max(rows - 1, 1))
    r, c = np.divmod(np.arange(rows * cols), cols)
    xy = np.stack([c * step, r * step], axis=1).astype(np.float64)
    offset = canvas.center - np.array([(cols - 1) * step, (rows - 1) * step]) / 2
    return xy + offset


def layout_star_perfect(leaves: int, canvas: Canvas = Canvas()) -> np.ndarray:
    """Center node 0 in the middle, leaf ``j`` at angle ``2 pi (j - 1) / leaves``."""
    radius = min(canvas.width, canvas.height) / 2 - canvas.margin
    ang = 2 * np.pi * np.arange(leaves) / leaves
    ring = np.stack([np.cos(ang), np.sin(ang)], axis=1) * radius
    return np.vstack([canvas.center, ring + canvas.center])


# ---------------------------------------------------------------- PivotMDS

def bfs_distances(g: Graph, source: int) -> np.ndarray:
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[source] = 0
    frontier = [source]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for u in frontier:
            for v in g.neighbors[u]:
                if dist[v] < 0:
                    dist[v] = d
                    nxt.append(v)
        frontier = nxt
    if (dist < 0).any():
        raise GraphError(f"graph is disconnected: {int((dist < 0).sum())} node(s) unreachable")
    return dist


def select_pivots(g: Graph, count: int) -> tuple[list[int], np.ndarray]:
    """Max-min pivot sweep seeded at the lowest-index node of highest degree.

    Returns the pivots and the ``n x count`` distance matrix.
    """
    first = int(np.argmax(g.degrees))
    pivots = [first]
    cols = [bfs_distances(g, first)]
    mind = cols[0].copy()
    while len(pivots) < count:
        nxt = int(np.argmax(mind))  # first index among ties
        pivots.append(nxt)
        cols.append(bfs_distances(g, nxt))
        mind = np.minimum(mind, cols[-1])
    return pivots, np.stack(cols, axis=1).astype(np.float64)


def _top2(C: np.ndarray, iterations: int):
    """Top two right singular vectors of ``C`` by block power iteration on C^T C."""
    p = C.shape[1]
    M = C.T @ C
    V = np.zeros((p, 2))
    V[0, 0] = 1.0
    V[min(1, p - 1), 1] = 1.0 if p > 1 else 0.0
    if p == 1:
        V[:, 1] = 0.0
    for _ in range(iterations):
        V = M @ V
        # Gram-Schmidt in fixed order
        n0 = np.linalg.norm(V[:, 0])
        if n0 == 0:
            break
        V[:, 0] /= n0
        V[:, 1] -= V[:, 0] * (V[:, 0] @ V[:, 1])
        n1 = np.linalg.norm(V[:, 1])
        if n1 > 0:
            V[:, 1] /= n1
    # Rayleigh-Ritz inside the converged 2-D subspace
    small = V.T @ M @ V
    w, Q = np.linalg.eigh(small)
    V = V @ Q[:, ::-1]
    return V, w[::-1]


def layout_pivotmds(g: Graph, cfg: PmdsConfig = PmdsConfig(), canvas: Canvas | None = Canvas()) -> np.ndarray:
    """Deterministic PivotMDS drawing.

    Squared pivot distances are double-centered, projected on the top two
    singular directions and scaled into ``canvas`` (pass None for raw
    coordinates). When the second direction carries no variance the drawing
    is kept collinear and a :class:`DegenerateLayoutWarning` is raised.
    """
    if g.n == 1:
        return np.zeros((1, 2)) if canvas is None else canvas.center[None, :].copy()
    count = min(g.n, cfg.pivots or 12)
    if count < 2:
        raise ValueError("PivotMDS needs at least 2 pivots")
    _, D = select_pivots(g, count)
    D2 = D * D
    C = -0.5 * (D2 - D2.mean(axis=0, keepdims=True) - D2.mean(axis=1, keepdims=True) + D2.mean())
    V, ev = _top2(C, cfg.power_iterations)
    X = C @ V
    if ev[0] <= 0:
        raise GraphError("PivotMDS: distance matrix has no spread")
    if ev[1] <= 1e-9 * ev[0]:
        warnings.warn("PivotMDS: second direction is degenerate; drawing is collinear",
                      DegenerateLayoutWarning, stacklevel=2)
        X[:, 1] = 0.0
    # fix the sign of each axis so the result does not depend on iteration parity
    for j in range(2):
        col = X[:, j]
        k = int(np.argmax(np.abs(col) > 1e-12 * np.abs(col).max())) if np.abs(col).max() > 0 else 0
        if col[k] < 0:
            X[:, j] = -col
    return X if canvas is None else normalize_to_canvas(X, canvas)


# ---------------------------------------------------------------- ForceAtlas2

def _separate_ties(pos: np.ndarray, eps: float) -> np.ndarray:
    """Move the later node of every (near-)coincident pair by ``eps``.

    The direction is a golden-angle step indexed by node, so the result only
    depends on the input.
    """
    pos = pos.copy()
    for _ in range(8):
        delta = pos[:, None, :] - pos[None, :, :]
        close = np.triu(np.einsum("ijk,ijk->ij", delta, delta) < (1e-3 * eps) ** 2, 1)
        if not close.any():
            break
        for j in np.unique(np.nonzero(close)[1]):
            ang = 2.399963229728653 * j
            pos[j] += eps * np.array([np.cos(ang), np.sin(ang)])
    return pos


def layout_forceatlas2(g: Graph, init, cfg: Fa2Config = Fa2Config(), trace: list | None = None) -> np.ndarray:
    """Run the ForceAtlas2 force model for exactly ``cfg.iterations`` steps.

    Linear attraction along edges, repulsion ``scaling * m_u * m_v / d`` with
    mass ``deg + 1``, gravity ``gravity * m_u`` toward the centroid, and the
    global plus per-node adaptive speed of the reference implementation.
    LinLog, overlap prevention and Barnes-Hut are not used.

    During the last ``cfg.cooling_steps`` steps no node may move further than
    it did in the step before, which damps the residual jitter left by the
    adaptive speed. If ``trace`` is a list, the mean node displacement of
    every step is appended to it.
    """
    pos = np.array(init, dtype=np.float64)
    if pos.shape != (g.n, 2):
        raise ValueError(f"init must have shape ({g.n}, 2), got {pos.shape}")
    if cfg.iterations == 0:
        return pos
    span = float(np.ptp(pos, axis=0).max()) if g.n > 1 else 1.0
    eps = 1e-3 * (span if span > 0 else 1.0)
    pos = _separate_ties(pos, eps)
    n = g.n
    mass = g.degrees.astype(np.float64) + 1.0
    mm = np.outer(mass, mass)
    E = np.array(g.edges, dtype=np.int64).reshape(-1, 2)
    src, dst = E[:, 0], E[:, 1]
    force = np.zeros((n, 2))
    speed, speed_eff = 1.0, 1.0
    idx = np.arange(n)
    cool_from = cfg.iterations - cfg.cooling_steps
    last_disp = None
    for it in range(cfg.iterations):
        old = force
        delta = pos[:, None, :] - pos[None, :, :]
        dist2 = np.einsum("ijk,ijk->ij", delta, delta)
        dist2[idx, idx] = 1.0
        if (dist2 == 0.0).any():
            pos = _separate_ties(pos, eps)
            delta = pos[:, None, :] - pos[None, :, :]
            dist2 = np.einsum("ijk,ijk->ij", delta, delta)
            dist2[idx, idx] = 1.0
        factor = cfg.scaling * mm / dist2
        factor[idx, idx] = 0.0
        force = np.einsum("ij,ijk->ik", factor, delta)
        # gravity toward the centroid
        to_c = pos - pos.mean(axis=0)
        dc = np.sqrt(np.einsum("ij,ij->i", to_c, to_c))
        gf = np.where(dc > 0, cfg.gravity * mass / np.where(dc > 0, dc, 1.0), 0.0)
        force -= to_c * gf[:, None]
        # linear attraction
        if len(E):
            d = pos[src] - pos[dst]
            np.add.at(force, src, -d)
            np.add.at(force, dst, d)
        # adaptive speed
        swing_v = np.sqrt(np.einsum("ij,ij->i", old - force, old - force))
        swinging = mass * swing_v
        traction = 0.5 * mass * np.sqrt(np.einsum("ij,ij->i", old + force, old + force))
        total_swing = float(swinging.sum())
        total_traction = float(traction.sum())
        est_jt = 0.05 * np.sqrt(n)
        min_jt = np.sqrt(est_jt)
        jt = cfg.jitter_tolerance * max(min_jt, min(10.0, est_jt * total_traction / (n * n)))
        if total_traction > 0 and total_swing / total_traction > 2.0:
            if speed_eff > 0.05:
                speed_eff *= 0.5
            jt = max(jt, cfg.jitter_tolerance)
        if total_swing > 0:
            target = cfg.speed_tolerance * jt * speed_eff * total_traction / total_swing
        else:
            target = speed * 1.5
        if total_swing > jt * total_traction:
            if speed_eff > 0.05:
                speed_eff *= 0.7
        elif speed < 1000:
            speed_eff *= 1.3
        speed = speed + min(target - speed, 0.5 * speed)
        node_factor = speed / (1.0 + np.sqrt(speed * swinging))
        step = force * node_factor[:, None]
        disp = np.sqrt(np.einsum("ij,ij->i", step, step))
        if it > cool_from and last_disp is not None:
            over = disp > last_disp
            if over.any():
                shrink = np.where(over, last_disp / np.where(over, disp, 1.0), 1.0)
                step = step * shrink[:, None]
                disp = np.minimum(disp, last_disp)
        last_disp = disp
        pos = pos + step
        if trace is not None:
            trace.append(float(disp.mean()))
    return pos


def forceatlas2_from_pivotmds(g: Graph, fa2: Fa2Config = Fa2Config(), pmds: PmdsConfig = PmdsConfig(),
                              canvas: Canvas = Canvas()) -> np.ndarray:
    """ForceAtlas2 started from the PivotMDS drawing, rescaled into the canvas."""
    init = layout_pivotmds(g, pmds, canvas)
    return normalize_to_canvas(layout_forceatlas2(g, init, fa2), canvas)
