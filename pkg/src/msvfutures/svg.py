"""Minimal deterministic SVG line/scatter charts (no plotting dependency).

Coordinates are written with fixed precision so identical data give
identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
W, H = 640, 420
ML, MR, MT, MB = 70, 150, 40, 55


@dataclass(frozen=True)
class Series:
    label: str
    x: tuple
    y: tuple
    style: str = "line"  # or "points"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n)


def _tick_label(v: float) -> str:
    return f"{v:.4g}"


def chart(series: list[Series], title: str, xlabel: str, ylabel: str) -> str:
    xs = np.concatenate([np.asarray(s.x, dtype=float) for s in series]) if series else np.zeros(1)
    ys = np.concatenate([np.asarray(s.y, dtype=float) for s in series]) if series else np.zeros(1)
    finite = np.isfinite(xs) & np.isfinite(ys)
    xs, ys = (xs[finite], ys[finite]) if finite.any() else (np.zeros(1), np.zeros(1))
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5
    pad = 0.05 * (y1 - y0) if y1 > y0 else max(abs(y0) * 0.05, 1e-3)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = W - ML - MR, H - MT - MB

    def px(x):
        return ML + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MT + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.0f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">'
           f'{escape(title)}</text>',
           f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>']
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{_fmt(px(t))}" y1="{MT + ph}" x2="{_fmt(px(t))}" y2="{MT + ph + 5}" stroke="#333"/>')
        out.append(f'<text x="{_fmt(px(t))}" y="{MT + ph + 18}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="11">{_tick_label(t)}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{ML - 5}" y1="{_fmt(py(t))}" x2="{ML}" y2="{_fmt(py(t))}" stroke="#333"/>')
        out.append(f'<text x="{ML - 8}" y="{_fmt(py(t) + 4)}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="11">{_tick_label(t)}</text>')
    out.append(f'<text x="{ML + pw / 2:.0f}" y="{H - 12}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{MT + ph / 2:.0f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
               f'transform="rotate(-90 16 {MT + ph / 2:.0f})">{escape(ylabel)}</text>')
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = [(px(a), py(b)) for a, b in zip(s.x, s.y) if np.isfinite(a) and np.isfinite(b)]
        if s.style == "points":
            for a, b in pts:
                out.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="2.5" fill="{color}"/>')
        elif pts:
            path = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = MT + 14 + 18 * i
        out.append(f'<rect x="{W - MR + 12}" y="{ly - 8}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{W - MR + 28}" y="{ly + 1}" font-family="sans-serif" font-size="11">'
                   f'{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
