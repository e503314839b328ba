"""Minimal static SVG line charts, no external renderer.

Just enough for a Fisher-Pry plot: data polyline, straight overlay lines,
axes with a handful of ticks.  Output is a plain SVG string.
"""

import math

__all__ = ["line_chart_svg"]

_WIDTH, _HEIGHT = 840, 480
_MARGIN = {"left": 64, "right": 16, "top": 28, "bottom": 44}
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


def _ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    for m in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= m * mag:
            step = m * mag
            break
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * step:
        out.append(round(v, 12))
        v += step
    return out


def line_chart_svg(series, title: str = "", x_label: str = "",
                   y_label: str = "") -> str:
    """Render (name, x, y) series as polylines in one chart.

    `series` is an iterable of (name, x_values, y_values); the first series
    is drawn as data, later ones as overlays with thicker strokes.
    """
    series = [(name, list(map(float, xs)), list(map(float, ys)))
              for name, xs, ys in series]
    xs_all = [v for _, xs, _ in series for v in xs]
    ys_all = [v for _, _, ys in series for v in ys]
    if not xs_all:
        raise ValueError("nothing to plot")
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.04 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    plot_w = _WIDTH - _MARGIN["left"] - _MARGIN["right"]
    plot_h = _HEIGHT - _MARGIN["top"] - _MARGIN["bottom"]

    def sx(x):
        return _MARGIN["left"] + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return _MARGIN["top"] + (y_hi - y) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_WIDTH / 2:.1f}" y="18" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )
    # axes box and ticks
    x0, y0 = _MARGIN["left"], _MARGIN["top"] + plot_h
    parts.append(
        f'<rect x="{_MARGIN["left"]}" y="{_MARGIN["top"]}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="#999" stroke-width="1"/>'
    )
    for tx in _ticks(x_lo, x_hi):
        px = sx(tx)
        parts.append(f'<line x1="{px:.1f}" y1="{y0}" x2="{px:.1f}" '
                     f'y2="{y0 + 5}" stroke="#555"/>')
        parts.append(f'<text x="{px:.1f}" y="{y0 + 18}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{tx:g}</text>')
    for ty in _ticks(y_lo, y_hi):
        py = sy(ty)
        parts.append(f'<line x1="{x0 - 5}" y1="{py:.1f}" x2="{x0}" '
                     f'y2="{py:.1f}" stroke="#555"/>')
        parts.append(f'<text x="{x0 - 8}" y="{py + 4:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{ty:g}</text>')
    if x_label:
        parts.append(f'<text x="{_MARGIN["left"] + plot_w / 2:.1f}" '
                     f'y="{_HEIGHT - 8}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="12">{x_label}</text>')
    if y_label:
        cy = _MARGIN["top"] + plot_h / 2
        parts.append(f'<text x="14" y="{cy:.1f}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="12" '
                     f'transform="rotate(-90 14 {cy:.1f})">{y_label}</text>')

    for k, (name, xs, ys) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        width = 1.0 if k == 0 else 2.0
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="{width}"><title>{name}</title></polyline>')
    parts.append("</svg>")
    return "\n".join(parts)
