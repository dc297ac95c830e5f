"""Minimal SVG line/marker plots, enough for the dissociation, Mott and convergence figures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd")


@dataclass
class Series:
    x: list
    y: list
    label: str
    color: str | None = None
    markers: bool = False
    dashed: bool = False
    line: bool = True


@dataclass
class Axes:
    series: list = field(default_factory=list)
    xlabel: str = ""
    ylabel: str = ""
    title: str = ""
    logy: bool = False


def nice_ticks(lo: float, hi: float, n: int = 5) -> list:
    if not math.isfinite(lo) or not math.isfinite(hi):
        return []
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks, t = [], start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _render_axes(ax: Axes, x0: float, y0: float, w: float, h: float, font: int = 12) -> list:
    pts = [(x, y) for s in ax.series for x, y in zip(s.x, s.y)
           if math.isfinite(x) and math.isfinite(y) and (not ax.logy or y > 0)]
    out = [f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="white" stroke="black"/>']
    if not pts:
        return out
    tf = (lambda v: math.log10(v)) if ax.logy else (lambda v: v)
    xs = [p[0] for p in pts]
    ys = [tf(p[1]) for p in pts]
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(ys), max(ys)
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    pad = 0.05 * (yhi - ylo or 1.0)
    ylo, yhi = ylo - pad, yhi + pad
    sx = lambda v: x0 + (v - xlo) / (xhi - xlo) * w
    sy = lambda v: y0 + h - (tf(v) - ylo) / (yhi - ylo) * h

    for t in nice_ticks(xlo, xhi):
        X = sx(t)
        out.append(f'<line x1="{X:.2f}" y1="{y0 + h}" x2="{X:.2f}" y2="{y0 + h + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{y0 + h + 8 + font}" font-size="{font}" text-anchor="middle">{_fmt(t)}</text>')
    yt = [10**k for k in range(math.floor(ylo), math.ceil(yhi) + 1)] if ax.logy else nice_ticks(ylo, yhi)
    for t in yt:
        Y = sy(t)
        if y0 - 1e-6 <= Y <= y0 + h + 1e-6:
            out.append(f'<line x1="{x0 - 5}" y1="{Y:.2f}" x2="{x0}" y2="{Y:.2f}" stroke="black"/>')
            out.append(f'<text x="{x0 - 8}" y="{Y + font / 3:.2f}" font-size="{font}" text-anchor="end">{_fmt(t)}</text>')

    for k, s in enumerate(ax.series):
        color = s.color or COLORS[k % len(COLORS)]
        good = [(sx(x), sy(y)) for x, y in zip(s.x, s.y)
                if math.isfinite(x) and math.isfinite(y) and (not ax.logy or y > 0)]
        if s.line and len(good) > 1:
            dash = ' stroke-dasharray="6,4"' if s.dashed else ""
            path = " ".join(f"{X:.2f},{Y:.2f}" for X, Y in good)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        if s.markers:
            out.extend(f'<circle cx="{X:.2f}" cy="{Y:.2f}" r="2.5" fill="{color}"/>' for X, Y in good)
        ly = y0 + 16 + 16 * k
        out.append(f'<line x1="{x0 + w - 140}" y1="{ly - 4}" x2="{x0 + w - 115}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x0 + w - 110}" y="{ly}" font-size="{font}">{escape(s.label)}</text>')

    out.append(f'<text x="{x0 + w / 2}" y="{y0 + h + 2 * font + 14}" font-size="{font + 1}" text-anchor="middle">{escape(ax.xlabel)}</text>')
    out.append(f'<text x="{x0 - 60}" y="{y0 + h / 2}" font-size="{font + 1}" text-anchor="middle" '
               f'transform="rotate(-90 {x0 - 60} {y0 + h / 2})">{escape(ax.ylabel)}</text>')
    if ax.title:
        out.append(f'<text x="{x0 + w / 2}" y="{y0 - 8}" font-size="{font + 2}" text-anchor="middle">{escape(ax.title)}</text>')
    return out


def render(main: Axes, inset: Axes | None = None, width: int = 720, height: int = 480) -> str:
    """SVG document with one main panel and an optional inset in its upper middle."""
    left, top, right, bottom = 90, 40, 20, 60
    w, h = width - left - right, height - top - bottom
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'font-family="sans-serif">', f'<rect width="{width}" height="{height}" fill="white"/>']
    parts += _render_axes(main, left, top, w, h)
    if inset is not None:
        parts += _render_axes(inset, left + 0.38 * w, top + 0.40 * h, 0.34 * w, 0.36 * h, font=10)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
