"""Bidirectional graph-LSTM layout model and the stacked Bi-LSTM baseline.

Parameters are plain ``dict[str, ndarray]``. Gate blocks are stacked in the
order input, output, candidate, forget, so a ``W`` of shape ``(4H, k)``
holds ``W_i, W_o, W_c, W_f`` from top to bottom.

Graph-LSTM names::

    fwd.W (4H, k)  fwd.U (4H, H)  fwd.Us (4H, H)  fwd.b (4H,)
    bwd.*          same shapes, independent values
    out.W (2, 2H)  out.b (2,)

``Us`` carries the skip-connection weights for real-edge predecessors.
Baseline names are ``l{layer}.{fwd|bwd}.{W,U,b_ih,b_hh}`` plus the same
readout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .graph import Graph, NodeSequence, skip_predecessors

GRAPH_LSTM = "graph_lstm"
BASELINE = "baseline"


@dataclass(frozen=True)
class ModelConfig:
    kind: str = GRAPH_LSTM
    hidden: int = 256
    k: int = 35
    layers: int = 1

    def __post_init__(self):
        if self.kind not in (GRAPH_LSTM, BASELINE):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.hidden < 1 or self.k < 1 or self.layers < 1:
            raise ValueError("hidden, k and layers must be positive")
        if self.kind == GRAPH_LSTM and self.layers != 1:
            raise ValueError("the graph-LSTM is single-layer")

    @classmethod
    def full_size(cls, kind: str = GRAPH_LSTM, k: int = 35) -> "ModelConfig":
        return cls(kind, 256, k, 1 if kind == GRAPH_LSTM else 4)


@dataclass
class CellState:
    h: Var
    c: Var


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    H, k = cfg.hidden, cfg.k
    shapes: dict[str, tuple[int, ...]] = {}
    if cfg.kind == GRAPH_LSTM:
        for d in ("fwd", "bwd"):
            shapes[f"{d}.W"] = (4 * H, k)
            shapes[f"{d}.U"] = (4 * H, H)
            shapes[f"{d}.Us"] = (4 * H, H)
            shapes[f"{d}.b"] = (4 * H,)
    else:
        for layer in range(cfg.layers):
            fan_in = k if layer == 0 else 2 * H
            for d in ("fwd", "bwd"):
                shapes[f"l{layer}.{d}.W"] = (4 * H, fan_in)
                shapes[f"l{layer}.{d}.U"] = (4 * H, H)
                shapes[f"l{layer}.{d}.b_ih"] = (4 * H,)
                shapes[f"l{layer}.{d}.b_hh"] = (4 * H,)
    shapes["out.W"] = (2, 2 * H)
    shapes["out.b"] = (2,)
    return shapes


def param_count(params: Mapping[str, np.ndarray]) -> int:
    return int(sum(np.asarray(v).size for v in params.values()))


def init_params(cfg: ModelConfig, seed: int = 0, dtype=np.float64) -> dict[str, np.ndarray]:
    """Glorot-uniform weights per gate matrix, zero biases, forget bias 1.

    For the baseline only ``b_ih`` carries the forget bias, so the effective
    forget bias matches the graph-LSTM.
    """
    rng = np.random.default_rng(seed)
    H = cfg.hidden
    params = {}
    for name, shape in param_shapes(cfg).items():
        if len(shape) == 2:
            rows = H if shape[0] == 4 * H else shape[0]
            s = np.sqrt(6.0 / (shape[1] + rows))
            params[name] = rng.uniform(-s, s, size=shape).astype(dtype)
        else:
            b = np.zeros(shape, dtype=dtype)
            if not name.startswith("out.") and not name.endswith("b_hh"):
                b[3 * H:] = 1.0
            params[name] = b
    return params


# ---------------------------------------------------------------- cells

def _cell(xw, uh_prev, c_prev, skip_uh: Sequence, skip_c: Sequence, H: int) -> CellState:
    """Shared gate arithmetic.

    ``xw`` is ``W x + b`` (4H), ``uh_prev`` is ``U h_prev`` or None when
    there is no chain predecessor, ``skip_uh[j]`` is ``Us h_j`` for each
    real-edge predecessor ``j`` with cell state ``skip_c[j]``.
    """
    pre = xw if uh_prev is None else ad.add(xw, uh_prev)
    if skip_uh:
        s = skip_uh[0] if len(skip_uh) == 1 else ad.add_n(skip_uh)
        pre_ioc = ad.add(pre[: 3 * H], s[: 3 * H])
    else:
        pre_ioc = pre[: 3 * H]
    io = ad.sigmoid(pre_ioc[: 2 * H])
    i, o = io[:H], io[H:]
    cand = ad.tanh(pre_ioc[2 * H:])
    terms = [ad.hadamard(i, cand)]
    if c_prev is not None:
        f = ad.sigmoid(pre[3 * H:])
        terms.append(ad.hadamard(f, c_prev))
    if skip_uh:
        xw_f = xw[3 * H:]
        for uh, ck in zip(skip_uh, skip_c):
            fk = ad.sigmoid(ad.add(xw_f, uh[3 * H:]))
            terms.append(ad.hadamard(fk, ck))
    c = terms[0] if len(terms) == 1 else ad.add_n(terms)
    h = ad.hadamard(o, ad.tanh(c))
    return CellState(h, c)


def graph_lstm_cell(x, prev: CellState | None, skips: Sequence[CellState], W, U, Us, b) -> CellState:
    """One graph-LSTM transition.

    ``prev`` is the state of the sequence predecessor (None at the start of
    a sweep); ``skips`` are states of earlier nodes joined by real edges.
    With no skips this is the standard LSTM cell.
    """
    H = ad._val(U).shape[1]
    xw = ad.linear(x, W, b)
    uh_prev = None if prev is None else ad.linear(prev.h, U)
    c_prev = None if prev is None else prev.c
    skip_uh = [ad.linear(s.h, Us) for s in skips]
    return _cell(xw, uh_prev, c_prev, skip_uh, [s.c for s in skips], H)


def standard_lstm_cell(x, prev: CellState | None, W, U, b_ih, b_hh=None) -> CellState:
    H = ad._val(U).shape[1]
    b = b_ih if b_hh is None else ad.add(b_ih, b_hh)
    xw = ad.linear(x, W, b)
    uh_prev = None if prev is None else ad.linear(prev.h, U)
    return _cell(xw, uh_prev, None if prev is None else prev.c, [], [], H)


# ---------------------------------------------------------------- sweeps

def _sig(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def lstm_sweep(xw_all, U, Us, skips: Sequence[Sequence[int]], reverse: bool) -> Var:
    """Whole recurrent sweep as one recorded primitive.

    Same arithmetic as chaining :func:`_cell`, but with a hand-written
    backward pass through time. Returns hidden states (n x H) by position.
    ``Us`` may be None for a plain LSTM (then ``skips`` must be empty).
    """
    xw = ad._val(xw_all)
    Uv = ad._val(U)
    Usv = None if Us is None else ad._val(Us)
    n, H4 = xw.shape
    H = H4 // 4
    steps = list(range(n - 1, -1, -1)) if reverse else list(range(n))
    dt = xw.dtype
    hs = np.zeros((n, H), dtype=dt)
    cs = np.zeros((n, H), dtype=dt)
    tcs = np.zeros((n, H), dtype=dt)
    gates = np.zeros((n, H4), dtype=dt)  # i, o, cand, f (post-nonlinearity)
    uh = np.zeros((n, H4), dtype=dt)
    ush = np.zeros((n, H4), dtype=dt)
    fks: list = [None] * n
    prev_of = [-1] * n
    needed = np.zeros(n, dtype=bool)
    for s in skips:
        for j in s:
            needed[j] = True
    prev = -1
    for t in steps:
        pre = xw[t].copy()
        if prev >= 0:
            pre += uh[prev]
        sk = skips[t]
        if sk:
            pre[: 3 * H] += ush[sk, : 3 * H].sum(axis=0)
        g = gates[t]
        g[: 2 * H] = _sig(pre[: 2 * H])
        g[2 * H: 3 * H] = np.tanh(pre[2 * H: 3 * H])
        c = g[:H] * g[2 * H: 3 * H]
        if prev >= 0:
            g[3 * H:] = _sig(pre[3 * H:])
            c += g[3 * H:] * cs[prev]
        if sk:
            fk = _sig(xw[t, 3 * H:] + ush[sk, 3 * H:])
            fks[t] = fk
            c += (fk * cs[sk]).sum(axis=0)
        cs[t] = c
        tcs[t] = np.tanh(c)
        hs[t] = g[H: 2 * H] * tcs[t]
        uh[t] = Uv @ hs[t]
        if Usv is not None and needed[t]:
            ush[t] = Usv @ hs[t]
        prev_of[t] = prev
        prev = t

    def backward(gh):
        dh = np.array(gh, dtype=dt)
        dc = np.zeros((n, H), dtype=dt)
        d_uh = np.zeros((n, H4), dtype=dt)
        d_ush = np.zeros((n, H4), dtype=dt)
        dxw = np.zeros((n, H4), dtype=dt)
        for t in reversed(steps):
            dht = dh[t] + Uv.T @ d_uh[t]
            if Usv is not None and needed[t]:
                dht += Usv.T @ d_ush[t]
            g = gates[t]
            i, o, cand, f = g[:H], g[H: 2 * H], g[2 * H: 3 * H], g[3 * H:]
            dct = dc[t] + dht * o * (1.0 - tcs[t] * tcs[t])
            dpre = dxw[t]
            dpre[:H] = dct * cand * i * (1.0 - i)
            dpre[H: 2 * H] = dht * tcs[t] * o * (1.0 - o)
            dpre[2 * H: 3 * H] = dct * i * (1.0 - cand * cand)
            p = prev_of[t]
            if p >= 0:
                dpre[3 * H:] = dct * cs[p] * f * (1.0 - f)
                dc[p] += dct * f
                d_uh[p] += dpre
            sk = skips[t]
            if sk:
                fk = fks[t]
                dfk = dct * cs[sk] * fk * (1.0 - fk)
                dc[sk] += dct * fk
                d_ush[sk, : 3 * H] += dpre[: 3 * H]
                d_ush[sk, 3 * H:] += dfk
                dpre[3 * H:] += dfk.sum(axis=0)
        dU = d_uh.T @ hs
        dUs = None if Usv is None else d_ush.T @ hs
        return (dxw, dU) if Us is None else (dxw, dU, dUs)

    inputs = (xw_all, U) if Us is None else (xw_all, U, Us)
    return ad._emit(hs, inputs, backward)


def _sweep(xw_all: Var, U: Var, Us: Var | None, skips: Sequence[Sequence[int]],
           reverse: bool, H: int) -> Var:
    """Reference sweep built from elementary primitives, one record per op."""
    n = xw_all.value.shape[0]
    steps = range(n - 1, -1, -1) if reverse else range(n)
    needed = set()
    for s in skips:
        needed.update(s)
    h: list = [None] * n
    c: list = [None] * n
    uh: list = [None] * n
    ush: list = [None] * n
    prev = None
    for t in steps:
        st = _cell(
            xw_all[t],
            None if prev is None else uh[prev],
            None if prev is None else c[prev],
            [ush[j] for j in skips[t]],
            [c[j] for j in skips[t]],
            H,
        )
        h[t], c[t] = st.h, st.c
        uh[t] = ad.linear(st.h, U)
        if Us is not None and t in needed:
            ush[t] = ad.linear(st.h, Us)
        prev = t
    return ad.stack(h)


def _run_sweep(xw_all, U, Us, skips, reverse, H, fused):
    if fused:
        return lstm_sweep(xw_all, U, Us, skips, reverse)
    return _sweep(xw_all, U, Us, skips, reverse, H)


def _readout(hf: Var, hb: Var, W, b) -> Var:
    return ad.linear(ad.concat([hf, hb], axis=1), W, b)


def _as_vars(params: Mapping) -> dict[str, Var]:
    return {k: v if isinstance(v, Var) else Var(np.asarray(v)) for k, v in params.items()}


def graph_lstm_forward(params: Mapping, x: np.ndarray, skips: Sequence[Sequence[int]],
                       fused: bool = True) -> Var:
    """Layout (n x 2) for adjacency vectors ``x`` (n x k).

    ``skips[t]`` lists the earlier positions joined to position ``t`` by real
    edges. The backward sweep runs from the last position to the first with
    every skip link reversed.
    """
    p = _as_vars(params)
    H = p["fwd.U"].value.shape[1]
    n = len(skips)
    succ: list[list[int]] = [[] for _ in range(n)]
    for t, js in enumerate(skips):
        for j in js:
            succ[j].append(t)
    x = np.asarray(x, dtype=p["fwd.W"].value.dtype)
    hf = _run_sweep(ad.linear(x, p["fwd.W"], p["fwd.b"]), p["fwd.U"], p["fwd.Us"], skips, False, H, fused)
    hb = _run_sweep(ad.linear(x, p["bwd.W"], p["bwd.b"]), p["bwd.U"], p["bwd.Us"], succ, True, H, fused)
    return _readout(hf, hb, p["out.W"], p["out.b"])


def baseline_forward(params: Mapping, x: np.ndarray, layers: int, fused: bool = True) -> Var:
    p = _as_vars(params)
    H = p["l0.fwd.U"].value.shape[1]
    n = x.shape[0]
    none: list[list[int]] = [[] for _ in range(n)]
    inp = np.asarray(x, dtype=p["l0.fwd.W"].value.dtype)
    for layer in range(layers):
        outs = []
        for d, rev in (("fwd", False), ("bwd", True)):
            q = f"l{layer}.{d}."
            b = ad.add(p[q + "b_ih"], p[q + "b_hh"])
            outs.append(_run_sweep(ad.linear(inp, p[q + "W"], b), p[q + "U"], None, none, rev, H, fused))
        if layer == layers - 1:
            return _readout(outs[0], outs[1], p["out.W"], p["out.b"])
        inp = ad.concat(outs, axis=1)
    raise AssertionError("unreachable")


def model_forward(params: Mapping, cfg: ModelConfig, seq: NodeSequence,
                  skips: Sequence[Sequence[int]] | None = None, g: Graph | None = None) -> Var:
    """Predict coordinates for ``seq``; row ``i`` belongs to node ``seq.order[i]``.

    The graph-LSTM needs its real-edge predecessor lists, either given as
    ``skips`` or derived from ``g``.
    """
    if seq.k != cfg.k:
        raise ValueError(f"sequence was encoded with k={seq.k}, model expects k={cfg.k}")
    if cfg.kind == BASELINE:
        return baseline_forward(params, seq.vectors, cfg.layers)
    if skips is None:
        if g is None:
            raise ValueError("graph-LSTM forward needs skips or the graph")
        skips = skip_predecessors(g, seq.order)
    return graph_lstm_forward(params, seq.vectors, skips)


def predict(params: Mapping, cfg: ModelConfig, g: Graph, start: int = 0) -> np.ndarray:
    """Coordinates indexed by original node id, using the BFS from ``start``."""
    from .graph import bfs_order, encode_adjacency_vectors

    order = bfs_order(g, start)
    seq = encode_adjacency_vectors(g, order, cfg.k)
    y = model_forward(params, cfg, seq, g=g).value
    out = np.empty((g.n, 2), dtype=np.float64)
    out[list(order)] = y
    return out
