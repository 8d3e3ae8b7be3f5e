"""Deterministic artifact writers: CSV, JSON manifests and small SVG plots."""

from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy

from . import __version__

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def fmt(x) -> str:
    """Round-trip float formatting shared by every CSV."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, columns: dict[str, Sequence]) -> Path:
    names = list(columns)
    rows = zip(*(columns[n] for n in names))
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(names)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return path


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_json(path: Path, data) -> Path:
    with open(path, "w") as handle:
        json.dump(to_jsonable(data), handle, indent=2, sort_keys=False)
        handle.write("\n")
    return path


def versions() -> dict[str, str]:
    return {
        "lmcf": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def svg_plot(
    path: Path,
    series: Iterable[tuple[np.ndarray, np.ndarray, str]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    equal_aspect: bool = False,
    markers: bool = False,
    width: int = 640,
    height: int = 480,
) -> Path:
    """Line (or marker) plot of labelled ``(x, y, label)`` series."""
    series = [(np.asarray(x, float), np.asarray(y, float), lab) for x, y, lab in series]
    xs = np.concatenate([s[0] for s in series]) if series else np.zeros(1)
    ys = np.concatenate([s[1] for s in series]) if series else np.zeros(1)
    finite = np.isfinite(xs) & np.isfinite(ys)
    xs, ys = (xs[finite], ys[finite]) if finite.any() else (np.zeros(1), np.zeros(1))
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 - x0 < 1e-300:
        x0, x1 = x0 - 1.0, x1 + 1.0
    if y1 - y0 < 1e-300:
        y0, y1 = y0 - 1.0, y1 + 1.0
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom
    if equal_aspect:
        span = max((x1 - x0) / pw, (y1 - y0) / ph)
        cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        x0, x1 = cx - 0.5 * span * pw, cx + 0.5 * span * pw
        y0, y1 = cy - 0.5 * span * ph, cy + 0.5 * span * ph

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{_esc(title)}</text>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">{_esc(xlabel)}</text>',
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">{_esc(ylabel)}</text>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<text x="{px(t):.1f}" y="{top + ph + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{t:.3g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{left - 6}" y="{py(t) + 3:.1f}" text-anchor="end" font-family="sans-serif" font-size="10">{t:.3g}</text>')
    for i, (x, y, label) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        if markers:
            for a, b in zip(x[ok], y[ok]):
                out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="{color}"/>')
        else:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.3" points="{pts}"/>')
        if label:
            ly = top + 14 + 14 * i
            out.append(f'<text x="{left + pw - 6}" y="{ly}" text-anchor="end" font-family="sans-serif" font-size="11" fill="{color}">{_esc(label)}</text>')
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n")
    return path


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
