"""Minimal self-contained SVG line and bar charts.

Output is a pure function of the input series: coordinates are printed with a
fixed number of decimals and no timestamps or ids are embedded, so identical
data always yields identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from html import escape
from typing import Sequence

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 160, 40, 55
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


@dataclass(frozen=True)
class Series:
    label: str
    xs: Sequence[float]
    ys: Sequence[float]


def _fmt(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:.4g}"


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.floor(lo / step) * step
    ticks = []
    k = 0
    while True:
        t = start + k * step
        if t > hi + step * 1e-9:
            break
        if t >= lo - step * 1e-9:
            ticks.append(round(t, 12))
        k += 1
    return ticks


def _bounds(values: list[float], fixed: tuple[float, float] | None) -> tuple[float, float]:
    if fixed is not None:
        return fixed
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    lo = min(lo, 0.0)
    if hi == lo:
        hi = lo + 1.0
    return lo, hi


def chart(
    series: Sequence[Series],
    title: str,
    xlabel: str,
    ylabel: str,
    kind: str = "line",
    xrange: tuple[float, float] | None = None,
    yrange: tuple[float, float] | None = None,
) -> str:
    """Render *series* as an SVG document; ``kind`` is ``"line"`` or ``"bar"``."""
    xs_all = [float(x) for s in series for x in s.xs]
    ys_all = [float(y) for s in series for y in s.ys]
    x0, x1 = _bounds(xs_all, xrange)
    y0, y1 = _bounds(ys_all, yrange)
    if kind == "bar" and xrange is None:
        x0, x1 = x0 - 0.5, x1 + 0.5
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN_T + ph - (y - y0) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2 - MARGIN_R / 2:.2f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
    ]
    for t in nice_ticks(x0, x1):
        x = px(t)
        out.append(f'<line x1="{_fmt(x)}" y1="{MARGIN_T}" x2="{_fmt(x)}" y2="{MARGIN_T + ph}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{_fmt(x)}" y="{MARGIN_T + ph + 16}" text-anchor="middle">{_tick_label(t)}</text>')
    for t in nice_ticks(y0, y1):
        y = py(t)
        out.append(f'<line x1="{MARGIN_L}" y1="{_fmt(y)}" x2="{MARGIN_L + pw}" y2="{_fmt(y)}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{MARGIN_L - 6}" y="{_fmt(y + 4)}" text-anchor="end">{_tick_label(t)}</text>')
    out.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>'
    )
    out.append(
        f'<text x="{MARGIN_L + pw / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text x="16" y="{MARGIN_T + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {MARGIN_T + ph / 2:.2f})">{escape(ylabel)}</text>'
    )

    n = max(len(series), 1)
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = [(float(x), float(y)) for x, y in zip(s.xs, s.ys) if math.isfinite(x) and math.isfinite(y)]
        if kind == "bar":
            slot = (px(1.0) - px(0.0)) * 0.8 if x1 - x0 > 0 else 10.0
            bw = max(slot / n, 1.0)
            for x, y in pts:
                left = px(x) - slot / 2 + i * bw
                top = py(max(y, 0.0))
                out.append(
                    f'<rect x="{_fmt(left)}" y="{_fmt(top)}" width="{_fmt(bw)}" '
                    f'height="{_fmt(py(0.0) - top)}" fill="{color}"/>'
                )
        elif pts:
            path = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
            if len(pts) == 1:
                x, y = pts[0]
                out.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="3" fill="{color}"/>')
        ly = MARGIN_T + 10 + 18 * i
        lx = MARGIN_L + pw + 12
        out.append(f'<rect x="{lx}" y="{ly - 8}" width="14" height="10" fill="{color}"/>')
        out.append(f'<text x="{lx + 20}" y="{ly + 1}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def polyline_points(svg_text: str) -> list[list[tuple[float, float]]]:
    """Pixel coordinates of every polyline in a chart; used to compare curve geometry."""
    curves = []
    for chunk in svg_text.split('<polyline points="')[1:]:
        raw = chunk.split('"', 1)[0]
        curves.append([tuple(float(v) for v in p.split(",")) for p in raw.split()])
    return curves
