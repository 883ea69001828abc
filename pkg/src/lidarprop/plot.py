"""Recall-versus-IoU figure written as plain SVG (one polyline per curve)."""
from __future__ import annotations

import os
from xml.sax.saxutils import escape

from .evaluation import read_curve_csv

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=60, right=170, top=20, bottom=50)
X_RANGE = (0.3, 0.9)
Y_RANGE = (0.0, 1.0)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _sx(t):
    span = WIDTH - MARGIN["left"] - MARGIN["right"]
    return MARGIN["left"] + (t - X_RANGE[0]) / (X_RANGE[1] - X_RANGE[0]) * span


def _sy(r):
    span = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    return HEIGHT - MARGIN["bottom"] - (r - Y_RANGE[0]) / (Y_RANGE[1] - Y_RANGE[0]) * span


def recall_svg(curves: dict) -> str:
    """``curves`` maps a legend name to ``[(threshold, recall), ...]``."""
    x0, x1 = _sx(X_RANGE[0]), _sx(X_RANGE[1])
    y0, y1 = _sy(Y_RANGE[0]), _sy(Y_RANGE[1])
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="{x0:.2f}" y="{y1:.2f}" width="{x1 - x0:.2f}" height="{y0 - y1:.2f}" '
        'fill="none" stroke="black"/>',
    ]
    for i in range(7):
        t = X_RANGE[0] + 0.1 * i
        out.append(f'<line x1="{_sx(t):.2f}" y1="{y0:.2f}" x2="{_sx(t):.2f}" y2="{y0 + 5:.2f}" stroke="black"/>')
        out.append(f'<text x="{_sx(t):.2f}" y="{y0 + 18:.2f}" text-anchor="middle">{t:.1f}</text>')
    for i in range(6):
        r = 0.2 * i
        out.append(f'<line x1="{x0 - 5:.2f}" y1="{_sy(r):.2f}" x2="{x0:.2f}" y2="{_sy(r):.2f}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8:.2f}" y="{_sy(r) + 4:.2f}" text-anchor="end">{r:.1f}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle">IoU threshold</text>')
    out.append(f'<text x="16" y="{(y0 + y1) / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(y0 + y1) / 2:.2f})">Recall</text>')

    for k, (name, curve) in enumerate(curves.items()):
        color = COLORS[k % len(COLORS)]
        pts = " ".join(f"{_sx(t):.2f},{_sy(r):.2f}" for t, r in curve)
        out.append(f'<polyline class="curve" points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = MARGIN["top"] + 20 + 18 * k
        lx = x1 + 15
        out.append(f'<g class="legend-entry"><line x1="{lx:.2f}" y1="{ly:.2f}" x2="{lx + 20:.2f}" '
                   f'y2="{ly:.2f}" stroke="{color}" stroke-width="2"/>'
                   f'<text x="{lx + 26:.2f}" y="{ly + 4:.2f}">{escape(name)}</text></g>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_curve_files(paths, out_path) -> None:
    curves = {}
    for path in paths:
        name = os.path.splitext(os.path.basename(path))[0]
        if name in curves:
            # eval always writes recall_curve.csv; tell runs apart by directory
            name = os.path.join(os.path.basename(os.path.dirname(os.path.abspath(path))), name)
        while name in curves:
            name += "'"
        curves[name] = read_curve_csv(path)
    with open(out_path, "w") as fh:
        fh.write(recall_svg(curves))
