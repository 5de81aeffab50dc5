"""Dependency-free SVG line plots with byte-deterministic output."""

from __future__ import annotations

import numpy as np

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v):
    return format(float(v), ".6g")


def _nice_ticks(lo, hi, target=5):
    """Round tick positions covering [lo, hi] with a 1-2-5 step."""
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / max(target - 1, 1)
    mag = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = np.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * span:
        ticks.append(0.0 if abs(t) < 1e-12 * span else t)
        t += step
    return ticks


def emit_plot(series, style="lines", log_x=False, log_y=False,
              title="", xlabel="", ylabel="", size=(640, 440)) -> str:
    """Self-contained SVG for labeled (x, y) series.

    series: iterable of (label, xs, ys).  Identical input yields identical
    bytes; log axes require strictly positive data.
    """
    series = [(str(label), np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
              for label, xs, ys in series]
    if not series or any(len(xs) == 0 or len(xs) != len(ys) for _, xs, ys in series):
        raise ValueError("emit_plot needs at least one nonempty (x, y) series")
    if style not in ("lines", "points"):
        raise ValueError(f"unknown style {style!r}")

    def tx(v):
        if log_x:
            if np.any(v <= 0):
                raise ValueError("log x-axis requires positive x data")
            return np.log10(v)
        return v

    def ty(v):
        if log_y:
            if np.any(v <= 0):
                raise ValueError("log y-axis requires positive y data")
            return np.log10(v)
        return v

    pts = [(tx(xs), ty(ys)) for _, xs, ys in series]
    x_lo = min(float(xs.min()) for xs, _ in pts)
    x_hi = max(float(xs.max()) for xs, _ in pts)
    y_lo = min(float(ys.min()) for _, ys in pts)
    y_hi = max(float(ys.max()) for _, ys in pts)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pad_x = 0.03 * (x_hi - x_lo)
    pad_y = 0.06 * (y_hi - y_lo)
    x_lo, x_hi = x_lo - pad_x, x_hi + pad_x
    y_lo, y_hi = y_lo - pad_y, y_hi + pad_y

    W, H = size
    ml, mr, mt, mb = 64, 16, 28 if title else 12, 46

    def px(v):
        return ml + (v - x_lo) / (x_hi - x_lo) * (W - ml - mr)

    def py(v):
        return H - mb - (v - y_lo) / (y_hi - y_lo) * (H - mt - mb)

    out = []
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" '
               f'height="{H}" viewBox="0 0 {W} {H}">')
    out.append(f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>')
    out.append(f'<rect x="{ml}" y="{mt}" width="{W - ml - mr}" '
               f'height="{H - mt - mb}" fill="none" stroke="#444444"/>')
    if title:
        out.append(f'<text x="{W // 2}" y="18" font-size="13" '
                   f'text-anchor="middle" font-family="sans-serif">{title}</text>')

    def tick_label(v, logscale):
        return _fmt(10.0 ** v) if logscale else _fmt(v)

    for t in _nice_ticks(x_lo, x_hi):
        x = px(t)
        out.append(f'<line x1="{_fmt(x)}" y1="{H - mb}" x2="{_fmt(x)}" '
                   f'y2="{H - mb + 4}" stroke="#444444"/>')
        out.append(f'<text x="{_fmt(x)}" y="{H - mb + 16}" font-size="10" '
                   f'text-anchor="middle" font-family="sans-serif">'
                   f'{tick_label(t, log_x)}</text>')
    for t in _nice_ticks(y_lo, y_hi):
        y = py(t)
        out.append(f'<line x1="{ml - 4}" y1="{_fmt(y)}" x2="{ml}" '
                   f'y2="{_fmt(y)}" stroke="#444444"/>')
        out.append(f'<text x="{ml - 7}" y="{_fmt(y + 3)}" font-size="10" '
                   f'text-anchor="end" font-family="sans-serif">'
                   f'{tick_label(t, log_y)}</text>')
    if xlabel:
        out.append(f'<text x="{W // 2}" y="{H - 8}" font-size="11" '
                   f'text-anchor="middle" font-family="sans-serif">{xlabel}</text>')
    if ylabel:
        out.append(f'<text x="14" y="{H // 2}" font-size="11" text-anchor="middle" '
                   f'font-family="sans-serif" transform="rotate(-90 14 {H // 2})">'
                   f'{ylabel}</text>')

    for i, ((label, _, _), (xs, ys)) in enumerate(zip(series, pts)):
        color = _PALETTE[i % len(_PALETTE)]
        coords = [(px(x), py(y)) for x, y in zip(xs, ys)]
        if style == "lines":
            path = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in coords)
            out.append(f'<polyline fill="none" stroke="{color}" '
                       f'stroke-width="1.4" points="{path}"/>')
        else:
            for x, y in coords:
                out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="2.2" '
                           f'fill="{color}"/>')
        lx, ly = W - mr - 150, mt + 16 + 15 * i
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="1.4"/>')
        out.append(f'<text x="{lx + 28}" y="{ly}" font-size="10" '
                   f'font-family="sans-serif">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
