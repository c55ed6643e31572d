"""Static line plots written as plain SVG."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

W, H, PAD = 640, 400, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def line_plot(series: dict[str, tuple], title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """``series`` maps a legend name to (x, y); NaN breaks a polyline."""
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()]) if series else np.zeros(1)
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()]) if series else np.zeros(1)
    xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
    x0, x1 = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    y0, y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def px(x):
        return PAD + (x - x0) / (x1 - x0) * (W - 2 * PAD)

    def py(y):
        return H - PAD - (y - y0) / (y1 - y0) * (H - 2 * PAD)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
           f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
           f'<text x="{PAD}" y="{H - PAD + 16}" font-size="11">{_fmt(x0)}</text>',
           f'<text x="{W - PAD}" y="{H - PAD + 16}" font-size="11" text-anchor="end">{_fmt(x1)}</text>',
           f'<text x="{PAD - 4}" y="{H - PAD}" font-size="11" text-anchor="end">{_fmt(y0)}</text>',
           f'<text x="{PAD - 4}" y="{PAD + 4}" font-size="11" text-anchor="end">{_fmt(y1)}</text>',
           f'<text x="{W / 2}" y="{H - 12}" font-size="12" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="14" y="{H / 2}" font-size="12" transform="rotate(-90 14 {H / 2})" '
           f'text-anchor="middle">{escape(ylabel)}</text>',
           f'<text x="{W / 2}" y="24" font-size="14" text-anchor="middle">{escape(title)}</text>']
    for k, (name, (x, y)) in enumerate(series.items()):
        color = COLORS[k % len(COLORS)]
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        # split at non-finite samples
        runs, cur = [], []
        for xi, yi, good in zip(x, y, ok):
            if good:
                cur.append(f"{px(xi):.2f},{py(yi):.2f}")
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        for run in runs:
            if len(run) == 1:
                cx, cy = run[0].split(",")
                out.append(f'<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>')
            else:
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(run)}"/>')
        out.append(f'<text x="{W - PAD}" y="{PAD + 14 * (k + 1)}" font-size="11" fill="{color}" '
                   f'text-anchor="end">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
