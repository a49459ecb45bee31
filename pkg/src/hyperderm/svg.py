"""Dependency-free SVG line charts of spectra."""

from __future__ import annotations

from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 720, 440
MARGIN = {"left": 70, "right": 200, "top": 40, "bottom": 55}
X_RANGE_NM = (450.0, 950.0)

# tab10, cycled
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = np.ceil(lo / step) * step
    return [float(round(v, 10)) for v in np.arange(first, hi + step * 1e-9, step)]


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def line_chart(series: Mapping[str, tuple[Sequence[float], Sequence[float]]], title: str = "",
               y_label: str = "reflectance", x_range=X_RANGE_NM) -> str:
    """Render one polyline per series, legend entries in the same order.

    ``series`` maps a group name to ``(wavelengths_nm, values)``.
    """
    x0, x1 = map(float, x_range)
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    values = [np.asarray(v, dtype=float) for _, v in series.values()]
    finite = np.concatenate([v[np.isfinite(v)] for v in values]) if values else np.array([])
    y0, y1 = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if y1 - y0 < 1e-9:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def sx(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN["top"] + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    # axes
    bx, by = MARGIN["left"], MARGIN["top"] + ph
    out.append(f'<g class="axes" stroke="black" fill="none">'
               f'<line x1="{bx}" y1="{by}" x2="{bx + pw}" y2="{by}"/>'
               f'<line x1="{bx}" y1="{MARGIN["top"]}" x2="{bx}" y2="{by}"/></g>')
    out.append('<g class="x-ticks">')
    for t in np.arange(x0, x1 + 1e-9, 50.0):
        x = sx(t)
        out.append(f'<line x1="{x:.2f}" y1="{by}" x2="{x:.2f}" y2="{by + 5}" stroke="black"/>'
                   f'<text x="{x:.2f}" y="{by + 18}" text-anchor="middle">{t:g}</text>')
    out.append("</g>")
    out.append('<g class="y-ticks">')
    for t in _nice_ticks(y0, y1):
        y = sy(t)
        out.append(f'<line x1="{bx - 5}" y1="{y:.2f}" x2="{bx}" y2="{y:.2f}" stroke="black"/>'
                   f'<text x="{bx - 8}" y="{y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    out.append("</g>")
    out.append(f'<text x="{bx + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">wavelength (nm)</text>')
    out.append(f'<text transform="translate(18 {MARGIN["top"] + ph / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle">{escape(y_label)}</text>')

    legend_x = bx + pw + 20
    for i, (name, (lam, val)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        lam = np.asarray(lam, dtype=float)
        val = np.asarray(val, dtype=float)
        keep = np.isfinite(val) & (lam >= x0) & (lam <= x1)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(lam[keep], val[keep]))
        out.append(f'<polyline class="series" data-group="{escape(name, {chr(34): "&quot;"})}" '
                   f'fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = MARGIN["top"] + 10 + 18 * i
        out.append(f'<g class="legend-entry"><line x1="{legend_x}" y1="{ly}" x2="{legend_x + 20}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>'
                   f'<text x="{legend_x + 26}" y="{ly + 4}">{escape(name)}</text></g>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
