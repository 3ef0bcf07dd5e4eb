"""Minimal static SVG line plots on log-log axes."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 560, 400
MARGIN = dict(left=70, right=20, top=40, bottom=50)
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]


def _ticks(lo: float, hi: float) -> list[int]:
    a, b = math.floor(lo), math.ceil(hi)
    step = max(1, (b - a) // 6)
    return list(range(a, b + 1, step))


def loglog_svg(series: list[dict], *, title: str = "", xlabel: str = "x", ylabel: str = "y",
               base: float = 2.0) -> str:
    """Render ``series`` (dicts with ``x``, ``y``, ``label``, optional ``dashed``) as an SVG string."""
    xs = np.concatenate([np.asarray(s["x"], float) for s in series])
    ys = np.concatenate([np.asarray(s["y"], float) for s in series])
    ok = (xs > 0) & (ys > 0)
    if not np.any(ok):
        raise ValueError("nothing positive to plot")
    lb = math.log(base)
    lx, ly = np.log(xs[ok]) / lb, np.log(ys[ok]) / lb
    x0, x1 = float(lx.min()), float(lx.max())
    y0, y1 = float(ly.min()), float(ly.max())
    if x1 - x0 < 1e-9:
        x0, x1 = x0 - 1, x1 + 1
    if y1 - y0 < 1e-9:
        y0, y1 = y0 - 1, y1 + 1
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN["top"] + (1 - (v - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
           'fill="none" stroke="black"/>']
    for t in _ticks(x0, x1):
        if x0 <= t <= x1:
            out.append(f'<line x1="{px(t):.1f}" y1="{MARGIN["top"] + ph}" x2="{px(t):.1f}" '
                       f'y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{px(t):.1f}" y="{MARGIN["top"] + ph + 18}" '
                       f'text-anchor="middle">{base:g}^{t}</text>')
    for t in _ticks(y0, y1):
        if y0 <= t <= y1:
            out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{py(t):.1f}" x2="{MARGIN["left"]}" '
                       f'y2="{py(t):.1f}" stroke="black"/>')
            out.append(f'<text x="{MARGIN["left"] - 8}" y="{py(t) + 4:.1f}" '
                       f'text-anchor="end">{base:g}^{t}</text>')
    out.append(f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{HEIGHT / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {HEIGHT / 2:.1f})">{escape(ylabel)}</text>')
    for i, s in enumerate(series):
        x = np.asarray(s["x"], float)
        y = np.asarray(s["y"], float)
        keep = (x > 0) & (y > 0)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(np.log(x[keep]) / lb, np.log(y[keep]) / lb))
        color = COLORS[i % len(COLORS)]
        dash = ' stroke-dasharray="6,4"' if s.get("dashed") else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        if not s.get("dashed"):
            for p in pts.split():
                cx, cy = p.split(",")
                out.append(f'<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>')
        ly_pos = MARGIN["top"] + 16 + 16 * i
        out.append(f'<line x1="{MARGIN["left"] + 10}" y1="{ly_pos - 4}" x2="{MARGIN["left"] + 30}" '
                   f'y2="{ly_pos - 4}" stroke="{color}"{dash}/>')
        out.append(f'<text x="{MARGIN["left"] + 36}" y="{ly_pos}">{escape(s.get("label", ""))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def slope_line(x, anchor_x: float, anchor_y: float, slope: float) -> np.ndarray:
    """Values of the power law through ``(anchor_x, anchor_y)`` with the given exponent."""
    x = np.asarray(x, dtype=float)
    return anchor_y * (x / anchor_x) ** slope
