"""Synthetic benchmark graphs: lattices, stars and planted-partition graphs.

Clustered graphs come from a degree-corrected planted partition model rather
than the full LFR benchmark. Each node gets a target degree drawn uniformly
around the requested average and a balanced community assignment; a pair in
the same community is joined with probability proportional to
``(1 - mu) * w_i * w_j`` and a cross pair with ``mu * w_i * w_j``, normalised
so that a fraction ``mu`` of each node's expected degree leaves its community.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .graph import Graph, is_connected, wl_hash

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")


class InfeasibleSpecError(ValueError):
    pass


@dataclass(frozen=True)
class GenSpec:
    kind: str
    rows: int = 0
    cols: int = 0
    leaves: int = 0
    n: int = 0
    avg_degree: float = 0.0
    communities: int = 0
    mu: float = 0.0
    max_degree: int | None = None
    seed: int = 0

    def to_dict(self) -> dict:
        keep = {"grid": ("rows", "cols"), "star": ("leaves",),
                "clustered": ("n", "avg_degree", "communities", "mu", "max_degree", "seed")}[self.kind]
        d = asdict(self)
        return {"kind": self.kind, **{k: d[k] for k in keep}}

    @classmethod
    def from_dict(cls, d: dict) -> "GenSpec":
        return cls(**d)


def gen_grid(rows: int, cols: int) -> Graph:
    """``rows x cols`` lattice; node ``r * cols + c`` sits at row ``r``, column ``c``."""
    if rows < 2 or cols < 2:
        raise InfeasibleSpecError("grid needs at least 2 rows and 2 columns")
    edges = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if c + 1 < cols:
                edges.append((u, u + 1))
            if r + 1 < rows:
                edges.append((u, u + cols))
    return Graph(rows * cols, tuple(edges), meta={"kind": "grid", "rows": rows, "cols": cols})


def gen_star(leaves: int) -> Graph:
    """Star with center node 0 and leaves ``1..leaves``."""
    if leaves < 1:
        raise InfeasibleSpecError("star needs at least one leaf")
    return Graph(leaves + 1, tuple((0, i) for i in range(1, leaves + 1)),
                 meta={"kind": "star", "leaves": leaves})


def balanced_communities(n: int, c: int, rng: np.random.Generator) -> np.ndarray:
    labels = np.arange(n) % c
    rng.shuffle(labels)
    return labels


def _sample_planted(n, comm, w, mu, rng):
    same = comm[:, None] == comm[None, :]
    total = w.sum()
    s_comm = np.array([w[comm == c].sum() for c in range(comm.max() + 1)])
    s_in = s_comm[comm]
    s_out = total - s_in
    w_in = np.maximum(s_in[:, None] - w[:, None], 1e-12)
    denom_out = np.maximum(0.5 * (s_out[:, None] + s_out[None, :]), 1e-12)
    p_in = (1.0 - mu) * np.outer(w, w) / np.sqrt(w_in * w_in.T)
    p_out = mu * np.outer(w, w) / denom_out
    p = np.where(same, p_in, p_out)
    p = np.clip(p, 0.0, 1.0)
    iu = np.triu_indices(n, 1)
    draws = rng.random(len(iu[0]))
    keep = draws < p[iu]
    return list(zip(iu[0][keep].tolist(), iu[1][keep].tolist()))


def _components(n, edges):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
    groups: dict[int, list[int]] = {}
    for v in range(n):
        groups.setdefault(find(v), []).append(v)
    return sorted(groups.values(), key=lambda g: g[0])


def _repair(n, edges):
    """Join components by single edges between their highest-degree nodes."""
    deg = np.zeros(n, dtype=int)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    comps = _components(n, edges)
    hubs = [max(c, key=lambda v: (deg[v], -v)) for c in comps]
    added = [(min(a, b), max(a, b)) for a, b in zip(hubs, hubs[1:])]
    return edges + added, added


def gen_clustered(spec: GenSpec, max_attempts: int = 50) -> Graph:
    """Connected planted-partition graph with community labels.

    A sample is accepted when it is connected, its average degree is within
    20% of the target and no degree exceeds ``spec.max_degree``. After
    ``max_attempts`` rejected samples the last one is made connected by
    adding bridging edges; ``meta["repaired"]`` records this.
    """
    n, d, c, mu = spec.n, spec.avg_degree, spec.communities, spec.mu
    if n < 2 or c < 1 or c > n:
        raise InfeasibleSpecError(f"need 2 <= n and 1 <= communities <= n, got n={n}, communities={c}")
    if d < 1 or d > n - 1:
        raise InfeasibleSpecError(f"average degree {d} not in [1, n-1]")
    if not 0.0 <= mu < 1.0:
        raise InfeasibleSpecError(f"mixing fraction {mu} not in [0, 1)")
    rng = np.random.default_rng(spec.seed)
    comm = balanced_communities(n, c, rng)
    edges: list = []
    attempts = 0
    for attempts in range(1, max_attempts + 1):
        w = rng.uniform(0.5 * d, 1.5 * d, size=n)
        edges = _sample_planted(n, comm, w, mu, rng)
        deg = np.bincount(np.array(edges, dtype=int).reshape(-1), minlength=n) if edges else np.zeros(n)
        ok_deg = abs(2 * len(edges) / n - d) <= 0.2 * d
        ok_cap = spec.max_degree is None or deg.max() <= spec.max_degree
        if ok_deg and ok_cap and len(_components(n, edges)) == 1:
            break
    else:
        attempts = max_attempts
    meta = {"kind": "clustered", "spec": spec.to_dict(), "attempts": attempts,
            "generator": "planted-partition (LFR substitute)"}
    if len(_components(n, edges)) > 1:
        edges, added = _repair(n, edges)
        meta["repaired"] = True
        meta["bridging_edges"] = [list(e) for e in added]
        log.info("clustered graph seed=%d repaired with %d bridging edges", spec.seed, len(added))
    g = Graph(n, tuple(edges), tuple(int(x) for x in comm), meta)
    assert is_connected(g)
    return g


def cross_fraction(g: Graph) -> float:
    """Fraction of edges joining different communities."""
    if not g.m:
        return 0.0
    cm = g.communities
    return sum(cm[u] != cm[v] for u, v in g.edges) / g.m


# ---------------------------------------------------------------- presets

TABLE1 = {
    "grid": {"train": 72, "val": 24, "test": 24},
    "star": {"train": 120, "val": 40, "test": 40},
    "general": {"train": 26000, "val": 3000, "test": 3000},
}
DESK = {"general": {"train": 2000, "val": 250, "test": 250}}


def grid_preset() -> list[Graph]:
    """120 grids with rows, cols in [10, 24] (100 to 576 nodes), no repeated shape."""
    shapes = [(r, c) for r in range(10, 25) for c in range(r, 25)]
    return [gen_grid(r, c) for r, c in shapes[:120]]


def star_preset() -> list[Graph]:
    """200 stars with 9..208 leaves."""
    return [gen_star(k) for k in range(9, 209)]


def clustered_spec(rng: np.random.Generator, seed: int) -> GenSpec:
    n = int(rng.integers(20, 51))
    c = int(rng.integers(2, min(12, n // 4) + 1))
    d = float(rng.uniform(3.0, 5.0))
    mu = float(rng.uniform(0.05, 0.3))
    return GenSpec("clustered", n=n, avg_degree=round(d, 3), communities=c,
                   mu=round(mu, 3), max_degree=10, seed=seed)


def clustered_preset(count: int, seed: int = 0) -> list[Graph]:
    rng = np.random.default_rng(seed)
    specs = [clustered_spec(rng, int(s)) for s in rng.integers(0, 2**31 - 1, size=count)]
    return [gen_clustered(s) for s in specs]


# ---------------------------------------------------------------- splits

@dataclass
class DatasetEntry:
    graph: Graph
    layout: np.ndarray | None = None
    split: str = "train"
    id: str = ""


@dataclass
class DrawingDataset:
    entries: list[DatasetEntry]
    style: str | None = None
    meta: dict = field(default_factory=dict)

    def split(self, name: str) -> list[DatasetEntry]:
        return [e for e in self.entries if e.split == name]

    def __len__(self):
        return len(self.entries)


def split_dataset(graphs: Sequence[Graph], fractions=(0.8, 0.1, 0.1), seed: int = 0,
                  counts: Sequence[int] | None = None) -> DrawingDataset:
    """Random train/val/test split without structural leaks.

    Validation or test graphs whose WL hash matches any training graph are
    dropped. ``counts`` gives exact split sizes instead of ``fractions``.
    """
    n = len(graphs)
    if counts is None:
        if not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
            raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
        n_train = int(round(fractions[0] * n))
        n_val = int(round(fractions[1] * n))
        counts = (n_train, n_val, n - n_train - n_val)
    if sum(counts) != n:
        raise ValueError(f"split counts {tuple(counts)} do not add up to {n} graphs")
    perm = np.random.default_rng(seed).permutation(n)
    labels = [SPLITS[0]] * counts[0] + [SPLITS[1]] * counts[1] + [SPLITS[2]] * counts[2]
    hashes = [wl_hash(g) for g in graphs]
    train_hashes = {hashes[i] for i, lab in zip(perm, labels) if lab == "train"}
    entries = []
    dropped = 0
    for i, lab in zip(perm, labels):
        if lab != "train" and hashes[i] in train_hashes:
            dropped += 1
            continue
        entries.append(DatasetEntry(graphs[i], None, lab, f"g{int(i):06d}"))
    entries.sort(key=lambda e: e.id)
    if dropped:
        warnings.warn(f"dropped {dropped} validation/test graph(s) isomorphic (by WL hash) to training graphs",
                      stacklevel=2)
    return DrawingDataset(entries, meta={"seed": seed, "counts": list(counts), "dropped": dropped})
