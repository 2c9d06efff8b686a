"""Minimal text SVG writers (heatmap, bar chart, polyline plot)."""

from __future__ import annotations

from html import escape
from typing import Dict, Sequence

import numpy as np


def _color(v: float) -> str:
    # dark blue -> yellow ramp
    v = min(1.0, max(0.0, v))
    r, g, b = int(255 * v), int(40 + 200 * v), int(140 * (1 - v))
    return f"#{r:02x}{g:02x}{b:02x}"


def _downsample(m: np.ndarray, max_cells: int) -> np.ndarray:
    n = max(m.shape)
    f = -(-n // max_cells)
    if f <= 1:
        return m
    h, w = -(-m.shape[0] // f) * f, -(-m.shape[1] // f) * f
    padded = np.full((h, w), np.nan)
    padded[: m.shape[0], : m.shape[1]] = m
    return np.nanmean(padded.reshape(h // f, f, w // f, f), axis=(1, 3))


def heatmap(matrix, title: str = "", cell: int = 3, max_cells: int = 196) -> str:
    m = _downsample(np.asarray(matrix, dtype=np.float64), max_cells)
    lo, hi = float(np.nanmin(m)), float(np.nanmax(m))
    span = hi - lo if hi > lo else 1.0
    rows, cols = m.shape
    top = 20
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{cols * cell}" height="{rows * cell + top}">',
        f'<text x="2" y="14" font-size="12" font-family="monospace">{escape(title)} '
        f"[{lo:.4g}, {hi:.4g}]</text>",
    ]
    for i in range(rows):
        for j in range(cols):
            out.append(
                f'<rect x="{j * cell}" y="{top + i * cell}" width="{cell}" height="{cell}" '
                f'fill="{_color((m[i, j] - lo) / span)}"/>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar_chart(values: Dict[str, float], title: str = "", width: int = 480, height: int = 240) -> str:
    names = list(values)
    vals = [float(values[k]) for k in names]
    vmax = max(vals + [1e-12])
    bw = width / max(1, len(names))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height + 40}">',
           f'<text x="2" y="14" font-size="12" font-family="monospace">{escape(title)}</text>']
    for i, (name, v) in enumerate(zip(names, vals)):
        h = (height - 30) * v / vmax
        x = i * bw + 4
        out.append(f'<rect x="{x:.1f}" y="{height - h:.1f}" width="{bw - 8:.1f}" height="{h:.1f}" fill="#3a6ea5"/>')
        out.append(f'<text x="{x:.1f}" y="{height + 14}" font-size="10" font-family="monospace">{escape(name)}</text>')
        out.append(f'<text x="{x:.1f}" y="{height - h - 3:.1f}" font-size="10" font-family="monospace">{v:g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_plot(series: Dict[str, Sequence[Sequence[float]]], title: str = "",
              width: int = 360, height: int = 360) -> str:
    """Polylines of ``(x, y)`` points in the unit square (e.g. PR curves)."""
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height + 20}">',
           f'<text x="2" y="14" font-size="12" font-family="monospace">{escape(title)}</text>',
           f'<rect x="0" y="20" width="{width}" height="{height}" fill="none" stroke="#888"/>']
    for k, (name, pts) in enumerate(series.items()):
        coords = " ".join(f"{x * width:.1f},{20 + (1 - y) * height:.1f}" for x, y in pts)
        color = palette[k % len(palette)]
        out.append(f'<polyline fill="none" stroke="{color}" points="{coords}"><title>{escape(name)}</title></polyline>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def mask_pgm(mask: np.ndarray) -> bytes:
    pix = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    h, w = pix.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes()


def gray_pgm(img: np.ndarray) -> bytes:
    img = np.asarray(img, dtype=np.float64)
    finite = np.isfinite(img)
    lo = float(img[finite].min()) if finite.any() else 0.0
    hi = float(img[finite].max()) if finite.any() else 0.0
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    pix = np.rint(np.where(finite, (img - lo) * scale, 255)).astype(np.uint8)
    h, w = pix.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes()
