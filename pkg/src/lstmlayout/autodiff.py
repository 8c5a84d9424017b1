"""Small reverse-mode differentiation kernel.

Values live in :class:`Var` objects. When a ``Var`` belongs to a
:class:`Tape`, every primitive applied to it is recorded together with a
backward rule; :meth:`Tape.backward` replays the records in exact reverse
order. Without a tape the same functions just compute values, so one model
definition serves both training and inference.

Weight gradients of matrix-vector products are not formed as one outer
product per call. They are queued and reduced with a single matrix product
when the gradient is read, which keeps recurrent models affordable.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping, Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class Var:
    __slots__ = ("value", "tape", "id")

    def __init__(self, value, tape: "Tape | None" = None, id: int = -1):
        self.value = value
        self.tape = tape
        self.id = id

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return hadamard(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def __repr__(self):
        return f"Var(shape={self.value.shape}, id={self.id})"


class _Outer:
    """Deferred ``outer(g, x)`` gradient contribution."""

    __slots__ = ("g", "x")

    def __init__(self, g, x):
        self.g = g
        self.x = x


class _Acc:
    """Gradient accumulator holding a dense part and queued outer products."""

    __slots__ = ("dense", "outers")

    def __init__(self):
        self.dense = None
        self.outers = []

    def add(self, g):
        if isinstance(g, _Outer):
            self.outers.append(g)
        elif self.dense is None:
            self.dense = g
        else:
            self.dense = self.dense + g

    def value(self):
        out = self.dense
        if self.outers:
            gs = np.stack([o.g for o in self.outers])
            xs = np.stack([o.x for o in self.outers])
            red = gs.T @ xs
            out = red if out is None else out + red
            self.outers = []
            self.dense = out
        return out


class Tape:
    """Ordered record of primitive applications."""

    def __init__(self):
        self._records: list[tuple[int, tuple, Callable]] = []
        self._n = 0
        self.leaves: list[Var] = []

    def __len__(self):
        return len(self._records)

    def _new(self, value) -> Var:
        v = Var(value, self, self._n)
        self._n += 1
        return v

    def leaf(self, value) -> Var:
        v = self._new(np.asarray(value))
        self.leaves.append(v)
        return v

    def record(self, value, inputs: Sequence[Var], backward: Callable) -> Var:
        """Register an op result; ``backward(g)`` returns one grad per input (or None)."""
        out = self._new(value)
        self._records.append((out.id, tuple(inputs), backward))
        return out

    def backward(self, out: Var, seed=None) -> "Gradients":
        if out.tape is not self:
            raise ValueError("output was not recorded on this tape")
        accs: dict[int, _Acc] = {}
        start = _Acc()
        start.add(np.ones_like(out.value) if seed is None else np.asarray(seed, dtype=out.value.dtype))
        accs[out.id] = start
        for out_id, inputs, bw in reversed(self._records):
            acc = accs.pop(out_id, None)
            if acc is None:
                continue
            grads = bw(acc.value())
            for var, g in zip(inputs, grads):
                if g is None or var.tape is not self:
                    continue
                a = accs.get(var.id)
                if a is None:
                    a = accs[var.id] = _Acc()
                a.add(g)
        return Gradients(accs)


class Gradients:
    def __init__(self, accs: dict[int, _Acc]):
        self._accs = accs

    def __getitem__(self, var: Var):
        acc = self._accs.get(var.id)
        if acc is None:
            return np.zeros_like(var.value)
        return acc.value()


def _tape_of(*xs) -> "Tape | None":
    for x in xs:
        if isinstance(x, Var) and x.tape is not None:
            return x.tape
    return None


def _val(x):
    return x.value if isinstance(x, Var) else np.asarray(x)


def _wrap(x) -> Var:
    return x if isinstance(x, Var) else Var(np.asarray(x))


def _emit(value, inputs, backward) -> Var:
    tape = _tape_of(*inputs)
    if tape is None:
        return Var(value)
    return tape.record(value, tuple(_wrap(x) for x in inputs), backward)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def constant(x) -> Var:
    return Var(np.asarray(x))


# ---------------------------------------------------------------- primitives

def add(a, b) -> Var:
    av, bv = _val(a), _val(b)
    try:
        out = av + bv
    except ValueError:
        raise ShapeError(f"add: incompatible shapes {av.shape} and {bv.shape}") from None
    sa, sb = av.shape, bv.shape
    return _emit(out, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Var:
    av, bv = _val(a), _val(b)
    try:
        out = av - bv
    except ValueError:
        raise ShapeError(f"sub: incompatible shapes {av.shape} and {bv.shape}") from None
    sa, sb = av.shape, bv.shape
    return _emit(out, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def hadamard(a, b) -> Var:
    av, bv = _val(a), _val(b)
    try:
        out = av * bv
    except ValueError:
        raise ShapeError(f"hadamard: incompatible shapes {av.shape} and {bv.shape}") from None
    return _emit(out, (a, b), lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def scale(a, s: float) -> Var:
    return _emit(_val(a) * s, (a,), lambda g: (g * s,))


def matmul(a, b) -> Var:
    """Matrix product of 2-D operands."""
    av, bv = _val(a), _val(b)
    if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {av.shape} and {bv.shape}")
    return _emit(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def matvec(w, x) -> Var:
    """``w @ x`` for a matrix ``w`` and a vector ``x``."""
    wv, xv = _val(w), _val(x)
    if wv.ndim != 2 or xv.ndim != 1 or wv.shape[1] != xv.shape[0]:
        raise ShapeError(f"matvec: incompatible shapes {wv.shape} and {xv.shape}")
    return _emit(wv @ xv, (w, x), lambda g: (_Outer(g, xv), wv.T @ g))


def linear(x, w, b=None) -> Var:
    """``x @ w.T + b`` for ``x`` of shape ``(m,)`` or ``(n, m)`` and ``w`` of shape ``(p, m)``."""
    xv, wv = _val(x), _val(w)
    if wv.ndim != 2 or xv.shape[-1] != wv.shape[1] or xv.ndim not in (1, 2):
        raise ShapeError(f"linear: incompatible shapes {xv.shape} and {wv.shape}")
    out = xv @ wv.T
    if b is not None:
        out = out + _val(b)
    vec = xv.ndim == 1

    def backward(g):
        gx = g @ wv
        gw = _Outer(g, xv) if vec else g.T @ xv
        gb = None if b is None else (g if vec else g.sum(axis=0))
        return gx, gw, gb

    inputs = (x, w) if b is None else (x, w, b)
    return _emit(out, inputs, backward)


def concat(xs: Sequence, axis: int = 0) -> Var:
    vals = [_val(x) for x in xs]
    try:
        out = np.concatenate(vals, axis=axis)
    except ValueError:
        raise ShapeError("concat: incompatible shapes " + ", ".join(str(v.shape) for v in vals)) from None
    splits = np.cumsum([v.shape[axis] for v in vals])[:-1]
    return _emit(out, tuple(xs), lambda g: tuple(np.split(g, splits, axis=axis)))


def stack(xs: Sequence) -> Var:
    vals = [_val(x) for x in xs]
    try:
        out = np.stack(vals)
    except ValueError:
        raise ShapeError("stack: incompatible shapes " + ", ".join(str(v.shape) for v in vals)) from None
    return _emit(out, tuple(xs), lambda g: tuple(g))


def getitem(a, idx) -> Var:
    av = _val(a)
    out = av[idx]

    fancy = isinstance(idx, (list, np.ndarray))

    def backward(g):
        full = np.zeros_like(av)
        if fancy:
            np.add.at(full, idx, g)
        else:
            full[idx] = g
        return (full,)

    return _emit(out, (a,), backward)


def sigmoid(a) -> Var:
    av = _val(a)
    out = 0.5 * (np.tanh(0.5 * av) + 1.0)
    return _emit(out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a) -> Var:
    out = np.tanh(_val(a))
    return _emit(out, (a,), lambda g: (g * (1.0 - out * out),))


def sum_reduce(a, axis=None) -> Var:
    av = _val(a)
    out = np.asarray(av.sum(axis=axis))

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, av.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), av.shape).copy(),)

    return _emit(out, (a,), backward)


def add_n(xs: Sequence) -> Var:
    """Sum of equally shaped operands as one record."""
    vals = [_val(x) for x in xs]
    shape = vals[0].shape
    for v in vals[1:]:
        if v.shape != shape:
            raise ShapeError(f"add_n: incompatible shapes {shape} and {v.shape}")
    out = vals[0].copy()
    for v in vals[1:]:
        out += v
    return _emit(out, tuple(xs), lambda g: (g,) * len(vals))


# ---------------------------------------------------------------- checking

def value_and_grad(f: Callable, params: Mapping[str, np.ndarray]):
    """Evaluate ``f(**vars)`` on a fresh tape; return ``(value, {name: grad})``."""
    tape = Tape()
    leaves = {k: tape.leaf(v) for k, v in params.items()}
    out = f(**leaves)
    if out.value.size != 1:
        raise ShapeError(f"expected a scalar output, got shape {out.value.shape}")
    grads = tape.backward(out)
    return float(out.value), {k: grads[v] for k, v in leaves.items()}


def gradient_check(f: Callable, params: Mapping[str, np.ndarray], h: float = 1e-6,
                   coords: Mapping[str, Iterable] | None = None) -> float:
    """Worst relative error between reverse-mode and central-difference gradients.

    ``f`` receives one keyword argument per parameter (a :class:`Var`) and
    returns a scalar ``Var``. The relative error of a coordinate is
    ``|a - b| / max(|a|, |b|, 1e-8)``. ``coords`` optionally restricts the
    check to some flat indices per parameter.
    """
    if not 1e-7 <= h <= 1e-4:
        raise ValueError(f"step h={h} outside [1e-7, 1e-4]")
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    f0, analytic = value_and_grad(f, params)
    if not np.isfinite(f0):
        raise FloatingPointError("f is not finite at the check point")

    def plain(p):
        v = f(**{k: Var(a) for k, a in p.items()}).value
        v = float(v)
        if not np.isfinite(v):
            raise FloatingPointError("f is not finite near the check point")
        return v

    worst = 0.0
    for name, arr in params.items():
        flat = arr.reshape(-1)
        idxs = range(flat.size) if coords is None or name not in coords else coords[name]
        ga = analytic[name].reshape(-1)
        for i in idxs:
            old = flat[i]
            flat[i] = old + h
            fp = plain(params)
            flat[i] = old - h
            fm = plain(params)
            flat[i] = old
            num = (fp - fm) / (2 * h)
            a = float(ga[i])
            err = abs(a - num) / max(abs(a), abs(num), 1e-8)
            worst = max(worst, err)
    return worst
