"""Minimal SVG line charts written as plain text (no plotting library)."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

__all__ = ["Series", "line_plot"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")
_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 150, 40, 50


class Series:
    """One named polyline; ``dashed`` draws it with a dash pattern."""

    def __init__(self, label: str, x, y, dashed: bool = False, markers: bool = False):
        self.label = label
        self.x = [float(v) for v in x]
        self.y = [float(v) for v in y]
        if len(self.x) != len(self.y):
            raise ValueError("x and y lengths differ")
        self.dashed = dashed
        self.markers = markers


def _tf(v: float, log: bool) -> float | None:
    if not math.isfinite(v):
        return None
    if log:
        return math.log10(v) if v > 0 else None
    return v


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        step = max(1, (b - a) // 6)
        return [float(k) for k in range(a, b + 1, step)]
    span = hi - lo
    raw = span / 5 if span > 0 else 1.0
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    out, v = [], first
    while v <= hi + 1e-12 * max(1.0, abs(hi)):
        out.append(round(v, 12))
        v += step
    return out


def _fmt_tick(v: float, log: bool) -> str:
    if log:
        return f"1e{int(v)}"
    return f"{v:.4g}"


def line_plot(
    series: list[Series],
    path: str | Path,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    logx: bool = False,
    logy: bool = False,
) -> Path:
    """Write an SVG line chart and return its path.

    Points that are non-finite, or nonpositive on a log axis, are skipped.
    """
    pts = []
    for s in series:
        cur = []
        for x, y in zip(s.x, s.y):
            tx, ty = _tf(x, logx), _tf(y, logy)
            if tx is not None and ty is not None:
                cur.append((tx, ty))
        pts.append(cur)
    flat = [p for cur in pts for p in cur]
    if flat:
        x0, x1 = min(p[0] for p in flat), max(p[0] for p in flat)
        y0, y1 = min(p[1] for p in flat), max(p[1] for p in flat)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def sx(v):
        return _ML + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return _MT + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{_ML + pw / 2:.1f}" y="{_H - 10}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="15" y="{_MT + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 15 {_MT + ph / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for t in _ticks(x0, x1, logx):
        if x0 <= t <= x1:
            out.append(f'<line x1="{sx(t):.1f}" y1="{_MT + ph}" x2="{sx(t):.1f}" y2="{_MT + ph + 4}" stroke="black"/>')
            out.append(f'<text x="{sx(t):.1f}" y="{_MT + ph + 16}" text-anchor="middle">{_fmt_tick(t, logx)}</text>')
    for t in _ticks(y0, y1, logy):
        if y0 <= t <= y1:
            out.append(f'<line x1="{_ML - 4}" y1="{sy(t):.1f}" x2="{_ML}" y2="{sy(t):.1f}" stroke="black"/>')
            out.append(f'<text x="{_ML - 6}" y="{sy(t) + 4:.1f}" text-anchor="end">{_fmt_tick(t, logy)}</text>')
    for k, (s, cur) in enumerate(zip(series, pts)):
        color = _COLORS[k % len(_COLORS)]
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        if len(cur) > 1:
            d = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in cur)
            out.append(f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>')
        if s.markers or len(cur) == 1:
            for x, y in cur:
                out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.5" fill="{color}"/>')
        ly = _MT + 12 + 16 * k
        out.append(f'<line x1="{_W - _MR + 10}" y1="{ly}" x2="{_W - _MR + 30}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{_W - _MR + 35}" y="{ly + 4}">{escape(s.label)}</text>')
    out.append("</svg>")
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text("\n".join(out) + "\n")
    return p
