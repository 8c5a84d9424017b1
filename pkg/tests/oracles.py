"""Small independent reference implementations used by several test files."""

import numpy as np


def brute_crossings(edges, p):
    """Pairwise segment intersection count with plain Python arithmetic."""
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    count = 0
    for x in range(len(edges)):
        for y in range(x + 1, len(edges)):
            (a, b), (c, d) = edges[x], edges[y]
            if len({a, b, c, d}) < 4:
                continue
            pa, pb, pc, pd = p[a], p[b], p[c], p[d]
            o1, o2, o3, o4 = orient(pa, pb, pc), orient(pa, pb, pd), orient(pc, pd, pa), orient(pc, pd, pb)
            if o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4):
                count += 1
            elif ((o1 == 0 and on_seg(pa, pb, pc)) or (o2 == 0 and on_seg(pa, pb, pd))
                  or (o3 == 0 and on_seg(pc, pd, pa)) or (o4 == 0 and on_seg(pc, pd, pb))):
                count += 1
    return count


def lstm_sweep(x, W, U, b, reverse=False):
    """Hidden states of a plain LSTM over rows of ``x``; gate rows are i, o, g, f."""
    H = U.shape[1]
    sig = lambda z: 1.0 / (1.0 + np.exp(-z))  # noqa: E731
    h, c = np.zeros(H), np.zeros(H)
    out = np.zeros((len(x), H))
    steps = range(len(x) - 1, -1, -1) if reverse else range(len(x))
    for t in steps:
        z = W @ x[t] + U @ h + b
        c = sig(z[:H]) * np.tanh(z[2 * H:3 * H]) + sig(z[3 * H:]) * c
        h = sig(z[H:2 * H]) * np.tanh(c)
        out[t] = h
    return out


def random_connected(n, rng, extra=3):
    """Random tree plus ``extra`` random chords, as an edge list."""
    edges = {(int(rng.integers(0, v)), v) for v in range(1, n)}
    while len(edges) < min(n - 1 + extra, n * (n - 1) // 2):
        u, v = sorted(rng.choice(n, 2, replace=False).tolist())
        edges.add((u, v))
    return sorted(edges)
