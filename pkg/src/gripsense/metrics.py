"""Error metrics and minimal SVG charts for prediction reports."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .errors import DatasetError


def _pair(pred, truth):
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if p.shape != t.shape:
        raise DatasetError(f"prediction and truth lengths differ: {p.size} vs {t.size}")
    if p.size == 0:
        raise DatasetError("no samples to evaluate")
    return p, t


def mse(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean((p - t) ** 2))


def rmse(pred, truth) -> float:
    return math.sqrt(mse(pred, truth))


def r2(pred, truth) -> float:
    """Coefficient of determination, 1 - SS_res / SS_tot (may be negative)."""
    p, t = _pair(pred, truth)
    ss_res = float(np.sum((t - p) ** 2))
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else float("-inf")
    return 1.0 - ss_res / ss_tot


def report(pred, truth, scale: float | None = None) -> dict:
    """MSE, RMSE, r^2 and RMSE as a percentage of the truth range.

    ``scale`` converts raw units to physical ones (for example newtons per
    count); the scaled RMSE is included when given.
    """
    p, t = _pair(pred, truth)
    span = float(t.max() - t.min())
    e = rmse(p, t)
    out = {"n": int(p.size), "mse": mse(p, t), "rmse": e, "r2": r2(p, t), "range": span,
           "rmse_pct_range": 100.0 * e / span if span > 0 else float("inf")}
    if scale is not None:
        out["rmse_scaled"] = e * scale
    return out


# -- SVG ---------------------------------------------------------------------------

COLORS = ("#1f4e79", "#c0392b", "#27ae60", "#8e44ad", "#d35400")


def _axes(w, h, pad, xlim, ylim, title, xlabel, ylabel):
    (x0, x1), (y0, y1) = xlim, ylim
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
           f'<rect width="{w}" height="{h}" fill="white"/>',
           f'<text x="{w / 2}" y="{pad / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{pad}" y="{pad}" width="{w - 2 * pad}" height="{h - 2 * pad}" fill="none" stroke="black"/>',
           f'<text x="{w / 2}" y="{h - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
           f'<text x="12" y="{h / 2}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 12 {h / 2})">{escape(ylabel)}</text>']
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        px = pad + (w - 2 * pad) * i / 4
        py = h - pad - (h - 2 * pad) * i / 4
        out.append(f'<text x="{px:.1f}" y="{h - pad + 14}" text-anchor="middle" font-size="10">{fx:.4g}</text>')
        out.append(f'<text x="{pad - 4}" y="{py + 3:.1f}" text-anchor="end" font-size="10">{fy:.4g}</text>')
    return out


def _limits(*arrays):
    v = np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays])
    v = v[np.isfinite(v)]
    lo, hi = (float(v.min()), float(v.max())) if v.size else (0.0, 1.0)
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    return lo, hi


def svg_timeseries(path, x, series: dict, title="", xlabel="frame", ylabel="force", w=900, h=360, pad=50):
    """Line chart of several series sharing an x axis."""
    x = np.asarray(x, dtype=float)
    xlim, ylim = _limits(x), _limits(*series.values())
    sx = (w - 2 * pad) / (xlim[1] - xlim[0])
    sy = (h - 2 * pad) / (ylim[1] - ylim[0])
    out = _axes(w, h, pad, xlim, ylim, title, xlabel, ylabel)
    for i, (name, y) in enumerate(series.items()):
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(y)
        pts = " ".join(f"{pad + (a - xlim[0]) * sx:.1f},{h - pad - (b - ylim[0]) * sy:.1f}"
                       for a, b in zip(x[ok], y[ok]))
        color = COLORS[i % len(COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{pts}"/>')
        out.append(f'<text x="{pad + 8}" y="{pad + 14 + 14 * i}" font-size="11" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def svg_scatter(path, truth, pred, title="", xlabel="true force", ylabel="predicted force",
                w=420, h=420, pad=50):
    """Prediction against truth with the identity line."""
    t = np.asarray(truth, dtype=float)
    p = np.asarray(pred, dtype=float)
    lim = _limits(t, p)
    s = (w - 2 * pad) / (lim[1] - lim[0])
    out = _axes(w, h, pad, lim, lim, title, xlabel, ylabel)
    out.append(f'<line x1="{pad}" y1="{h - pad}" x2="{w - pad}" y2="{pad}" stroke="#999" stroke-dasharray="4"/>')
    for a, b in zip(t, p):
        if math.isfinite(a) and math.isfinite(b):
            out.append(f'<circle cx="{pad + (a - lim[0]) * s:.1f}" cy="{h - pad - (b - lim[0]) * s:.1f}" '
                       f'r="1.2" fill="{COLORS[0]}" fill-opacity="0.5"/>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
