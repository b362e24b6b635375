"""Minimal deterministic SVG line plots (log-log by default).

Hand-rolled so the experiment artifacts carry no plotting dependency and
rerun byte-identically.
"""
from __future__ import annotations

import math

_WIDTH, _HEIGHT = 640, 420
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 20, 40, 50
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return format(v, ".6g")


def _transform(v: float, lo: float, hi: float, log: bool) -> float:
    if log:
        v, lo, hi = math.log10(v), math.log10(lo), math.log10(hi)
    if hi == lo:
        return 0.5
    return (v - lo) / (hi - lo)


def _axis_ticks(lo: float, hi: float, log: bool) -> list:
    if log:
        lo_e = math.floor(math.log10(lo))
        hi_e = math.ceil(math.log10(hi))
        return [10.0 ** e for e in range(int(lo_e), int(hi_e) + 1)]
    if hi == lo:
        return [lo]
    step = 10.0 ** math.floor(math.log10(hi - lo))
    if (hi - lo) / step < 3:
        step /= 2.0
    first = math.ceil(lo / step) * step
    ticks, t = [], first
    while t <= hi + 1e-12 * step:
        ticks.append(t)
        t += step
    return ticks


def line_plot(path, series, title: str = "", xlabel: str = "",
              ylabel: str = "", xlog: bool = True, ylog: bool = True) -> None:
    """Write an SVG with one polyline+markers per (label, xs, ys) series.

    Log axes silently fall back to linear if any value is nonpositive.
    """
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys if math.isfinite(y)]
    if not xs_all or not ys_all:
        xs_all, ys_all = [1.0], [1.0]
    xlog = xlog and min(xs_all) > 0
    ylog = ylog and min(ys_all) > 0
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if not ylog and y_lo == y_hi:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0

    def px(x):
        t = _transform(x, x_lo, x_hi, xlog)
        return _MARGIN_L + t * (_WIDTH - _MARGIN_L - _MARGIN_R)

    def py(y):
        t = _transform(y, y_lo, y_hi, ylog)
        return _HEIGHT - _MARGIN_B - t * (_HEIGHT - _MARGIN_T - _MARGIN_B)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
           f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
           f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
           f'<text x="{_WIDTH // 2}" y="24" text-anchor="middle" '
           f'font-family="monospace" font-size="14">{title}</text>']
    ax = (f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" '
          f'width="{_WIDTH - _MARGIN_L - _MARGIN_R}" '
          f'height="{_HEIGHT - _MARGIN_T - _MARGIN_B}" '
          'fill="none" stroke="black" stroke-width="1"/>')
    out.append(ax)
    for t in _axis_ticks(x_lo, x_hi, xlog):
        if not (x_lo <= t <= x_hi):
            continue
        x = px(t)
        out.append(f'<line x1="{_fmt(x)}" y1="{_HEIGHT - _MARGIN_B}" '
                   f'x2="{_fmt(x)}" y2="{_HEIGHT - _MARGIN_B + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{_HEIGHT - _MARGIN_B + 18}" '
                   f'text-anchor="middle" font-family="monospace" '
                   f'font-size="10">{_fmt(t)}</text>')
    for t in _axis_ticks(y_lo, y_hi, ylog):
        if not (y_lo <= t <= y_hi):
            continue
        y = py(t)
        out.append(f'<line x1="{_MARGIN_L - 5}" y1="{_fmt(y)}" '
                   f'x2="{_MARGIN_L}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{_MARGIN_L - 8}" y="{_fmt(y + 3)}" '
                   f'text-anchor="end" font-family="monospace" '
                   f'font-size="10">{_fmt(t)}</text>')
    out.append(f'<text x="{_WIDTH // 2}" y="{_HEIGHT - 12}" text-anchor="middle" '
               f'font-family="monospace" font-size="12">{xlabel}</text>')
    out.append(f'<text x="16" y="{_HEIGHT // 2}" text-anchor="middle" '
               f'font-family="monospace" font-size="12" '
               f'transform="rotate(-90 16 {_HEIGHT // 2})">{ylabel}</text>')
    for k, (label, xs, ys) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        pts = [(px(x), py(y)) for x, y in zip(xs, ys) if math.isfinite(y)]
        if len(pts) > 1:
            path_d = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
            out.append(f'<polyline points="{path_d}" fill="none" '
                       f'stroke="{color}" stroke-width="1.5"/>')
        for x, y in pts:
            out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" '
                       f'fill="{color}"/>')
        ly = _MARGIN_T + 14 + 14 * k
        out.append(f'<rect x="{_WIDTH - _MARGIN_R - 150}" y="{ly - 8}" '
                   f'width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{_WIDTH - _MARGIN_R - 135}" y="{ly}" '
                   f'font-family="monospace" font-size="10">{label}</text>')
    out.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(out) + "\n")
