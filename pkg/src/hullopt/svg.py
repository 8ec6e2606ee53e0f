"""Minimal self-contained SVG line and scatter plots for run reports."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50


def _frame(title: str, xlabel: str, ylabel: str, x, y) -> tuple[list[str], callable]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x0, x1 = (float(x.min()), float(x.max())) if len(x) else (0.0, 1.0)
    y0, y1 = (float(y.min()), float(y.max())) if len(y) else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def to_px(a, b):
        return LEFT + (a - x0) / (x1 - x0) * pw, TOP + (1.0 - (b - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="16" y="{H / 2}" text-anchor="middle" transform="rotate(-90 16 {H / 2})">{escape(ylabel)}</text>',
    ]
    for k in range(5):
        fx = x0 + (x1 - x0) * k / 4
        fy = y0 + (y1 - y0) * k / 4
        px, _ = to_px(fx, y0)
        _, py = to_px(x0, fy)
        out.append(f'<text x="{px:.1f}" y="{TOP + ph + 16}" text-anchor="middle">{fx:.4g}</text>')
        out.append(f'<text x="{LEFT - 6}" y="{py + 4:.1f}" text-anchor="end">{fy:.4g}</text>')
    return out, to_px


def line_plot(x, y, xlabel: str, ylabel: str, title: str = "") -> str:
    out, to_px = _frame(title, xlabel, ylabel, x, y)
    pts = " ".join("{:.1f},{:.1f}".format(*to_px(a, b)) for a, b in zip(x, y))
    out.append(f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scatter_plot(x, y, xlabel: str, ylabel: str, title: str = "") -> str:
    out, to_px = _frame(title, xlabel, ylabel, x, y)
    for a, b in zip(x, y):
        px, py = to_px(a, b)
        out.append(f'<circle cx="{px:.1f}" cy="{py:.1f}" r="2.5" fill="#d62728" fill-opacity="0.6"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


__all__ = ["line_plot", "scatter_plot"]
