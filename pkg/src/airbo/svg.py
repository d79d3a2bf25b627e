"""Minimal dependency-free SVG line charts.

CSV is the canonical output everywhere; these charts are a convenience
for eyeballing metric curves. Only what the curves need: axes, ticks,
multiple series, a legend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .data import atomic_write_text

_PALETTE = ["#1f3a93", "#e67e22", "#7f8c8d", "#16a085", "#8e44ad", "#c0392b"]


@dataclass
class Series:
    label: str
    xs: list[float]
    ys: list[float]


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def line_chart(
    series: list[Series],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    width: int = 640,
    height: int = 420,
) -> str:
    """Render series as an SVG document string."""
    pad_l, pad_r, pad_t, pad_b = 64, 16, 36, 48
    plot_w, plot_h = width - pad_l - pad_r, height - pad_t - pad_b
    xs = [x for s in series for x in s.xs if math.isfinite(x)]
    ys = [y for s in series for y in s.ys if math.isfinite(y)]
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y_lo, y_hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def px(x: float) -> float:
        return pad_l + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return pad_t + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{pad_l}" y="{pad_t}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        parts.append(
            f'<line x1="{px(t):.1f}" y1="{pad_t + plot_h}" x2="{px(t):.1f}" '
            f'y2="{pad_t + plot_h + 4}" stroke="#333"/>'
            f'<text x="{px(t):.1f}" y="{pad_t + plot_h + 18}" text-anchor="middle">{t:g}</text>'
        )
    for t in _ticks(y_lo, y_hi):
        parts.append(
            f'<line x1="{pad_l - 4}" y1="{py(t):.1f}" x2="{pad_l}" y2="{py(t):.1f}" '
            f'stroke="#333"/>'
            f'<text x="{pad_l - 8}" y="{py(t) + 4:.1f}" text-anchor="end">{t:.3g}</text>'
        )
    parts.append(
        f'<text x="{pad_l + plot_w / 2:.1f}" y="{height - 8}" text-anchor="middle">{x_label}</text>'
    )
    parts.append(
        f'<text x="16" y="{pad_t + plot_h / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {pad_t + plot_h / 2:.1f})">{y_label}</text>'
    )
    for i, s in enumerate(series):
        colour = _PALETTE[i % len(_PALETTE)]
        points = " ".join(
            f"{px(x):.2f},{py(y):.2f}"
            for x, y in zip(s.xs, s.ys)
            if math.isfinite(x) and math.isfinite(y)
        )
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{colour}" stroke-width="1.5"/>'
        )
        ly = pad_t + 14 + 16 * i
        parts.append(
            f'<line x1="{pad_l + 8}" y1="{ly - 4}" x2="{pad_l + 28}" y2="{ly - 4}" '
            f'stroke="{colour}" stroke-width="1.5"/>'
            f'<text x="{pad_l + 34}" y="{ly}">{s.label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_chart(series: list[Series], path, **kwargs) -> None:
    atomic_write_text(path, line_chart(series, **kwargs))
