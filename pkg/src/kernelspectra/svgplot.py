"""Minimal SVG line plots; plots are advisory, the CSVs are the contract."""

from __future__ import annotations

from pathlib import Path

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _panel(series, title: str, width: int, height: int, x_off: int,
           y_off: int) -> list[str]:
    pad = 42
    plot_w, plot_h = width - 2 * pad, height - 2 * pad
    xs = np.concatenate([np.asarray(s[0], dtype=float) for s in series])
    ys = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    y_lo, y_hi = y_lo - 0.05 * (y_hi - y_lo), y_hi + 0.05 * (y_hi - y_lo)

    def sx(x):
        return x_off + pad + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return y_off + pad + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    out = [f'<rect x="{x_off + pad}" y="{y_off + pad}" width="{plot_w}" '
           f'height="{plot_h}" fill="none" stroke="#888"/>',
           f'<text x="{x_off + width / 2:.1f}" y="{y_off + 24}" '
           f'text-anchor="middle" font-size="14">{title}</text>']
    for k, (x, y, label) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{sx(float(a)):.2f},{sy(float(b)):.2f}"
                       for a, b in zip(np.asarray(x), np.asarray(y)))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="1.2"/>')
        ly = y_off + pad + 16 * (k + 1)
        out.append(f'<line x1="{x_off + pad + 6}" y1="{ly}" '
                   f'x2="{x_off + pad + 26}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"/>')
        out.append(f'<text x="{x_off + pad + 32}" y="{ly + 4}" '
                   f'font-size="11">{label}</text>')
    for frac in (0.0, 0.5, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        out.append(f'<text x="{sx(xv):.1f}" y="{y_off + height - pad + 16}" '
                   f'text-anchor="middle" font-size="10">{xv:.3g}</text>')
        out.append(f'<text x="{x_off + pad - 6}" y="{sy(yv):.1f}" '
                   f'text-anchor="end" font-size="10">{yv:.3g}</text>')
    return out


def write_overlay_svg(path: str | Path, density_series, cdf_series,
                      description: str = "") -> None:
    """Two stacked panels: density overlay on top, CDF overlay below.

    Each series is a tuple (x, y, label).
    """
    width, panel_h = 640, 360
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{2 * panel_h}" font-family="sans-serif">']
    if description:
        safe = (description.replace("&", "&amp;").replace("<", "&lt;")
                .replace(">", "&gt;"))
        parts.append(f"<desc>{safe}</desc>")
    parts += _panel(density_series, "density", width, panel_h, 0, 0)
    parts += _panel(cdf_series, "cdf", width, panel_h, 0, panel_h)
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
