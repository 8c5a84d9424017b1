"""SVG node-link drawings."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .graph import Graph
from .layouts import Canvas, normalize_to_canvas
from .procrustes import procrustes_align

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939")
NODE_RADIUS = 8.0


def _body(g: Graph, xy: np.ndarray, dx: float = 0.0, radius: float = NODE_RADIUS) -> list[str]:
    out = ['<g stroke="#999" stroke-width="1">']
    for u, v in g.edges:
        out.append(f'<line x1="{xy[u, 0] + dx:.3f}" y1="{xy[u, 1]:.3f}" '
                   f'x2="{xy[v, 0] + dx:.3f}" y2="{xy[v, 1]:.3f}"/>')
    out.append("</g>")
    out.append('<g stroke="#fff" stroke-width="1">')
    for i in range(g.n):
        c = PALETTE[g.communities[i] % len(PALETTE)] if g.communities is not None else PALETTE[0]
        out.append(f'<circle cx="{xy[i, 0] + dx:.3f}" cy="{xy[i, 1]:.3f}" r="{radius:g}" fill="{c}"/>')
    out.append("</g>")
    return out


def render_svg(g: Graph, layout, canvas: Canvas = Canvas(), title: str | None = None) -> str:
    """One drawing, rescaled into the canvas."""
    xy = normalize_to_canvas(layout, canvas)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{canvas.width:g}" height="{canvas.height:g}" '
             f'viewBox="0 0 {canvas.width:g} {canvas.height:g}">']
    if title:
        parts.append(f"<title>{escape(title)}</title>")
    parts.append(f'<rect width="{canvas.width:g}" height="{canvas.height:g}" fill="white"/>')
    parts += _body(g, xy)
    parts.append("</svg>")
    return "\n".join(parts)


def render_side_by_side(g: Graph, truth, predicted, canvas: Canvas = Canvas(), title: str | None = None) -> str:
    """Ground truth on the left, prediction aligned onto it on the right."""
    t = normalize_to_canvas(truth, canvas)
    p = procrustes_align(predicted, t).aligned
    p = np.clip(p, 0.0, [canvas.width, canvas.height])
    w = 2 * canvas.width
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:g}" height="{canvas.height:g}" '
             f'viewBox="0 0 {w:g} {canvas.height:g}">']
    if title:
        parts.append(f"<title>{escape(title)}</title>")
    parts.append(f'<rect width="{w:g}" height="{canvas.height:g}" fill="white"/>')
    parts += _body(g, t)
    parts += _body(g, p, dx=canvas.width)
    parts.append("</svg>")
    return "\n".join(parts)
