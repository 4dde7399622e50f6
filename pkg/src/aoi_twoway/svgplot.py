"""Tiny deterministic SVG writer for line charts and heat grids.

Output is plain markup with fixed float formatting and no timestamps, so a
given input always produces byte-identical files; nothing here depends on a
plotting library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = ["Series", "line_chart", "heat_grid"]

_PALETTE = ("#1f6fb2", "#d1495b", "#3a8f5d", "#8a64a2", "#b9822f", "#5b5b5b")

_MARGIN_L = 64.0
_MARGIN_R = 16.0
_MARGIN_T = 30.0
_MARGIN_B = 46.0


@dataclass(frozen=True)
class Series:
    """One labelled polyline."""

    label: str
    xs: tuple
    ys: tuple
    dashed: bool = False


def _fmt(x: float) -> str:
    return format(float(x), ".2f")


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi) or hi <= lo:
        return [lo]
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def _esc(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


def line_chart(series: list[Series], *, title: str, xlabel: str, ylabel: str,
               width: int = 640, height: int = 440) -> str:
    """Render labelled polylines with linear axes and a legend."""
    finite_x = [x for s in series for x in s.xs if math.isfinite(x)]
    finite_y = [y for s in series for y in s.ys if math.isfinite(y)]
    if not finite_x or not finite_y:
        raise ValueError("line chart needs at least one finite point")
    x_lo, x_hi = min(finite_x), max(finite_x)
    y_lo, y_hi = min(finite_y), max(finite_y)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    plot_w = width - _MARGIN_L - _MARGIN_R
    plot_h = height - _MARGIN_T - _MARGIN_B

    def px(x: float) -> float:
        return _MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return _MARGIN_T + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{_esc(title)}</text>',
    ]
    for tx in _ticks(x_lo, x_hi):
        x = px(tx)
        parts.append(f'<line x1="{_fmt(x)}" y1="{_fmt(_MARGIN_T)}" '
                     f'x2="{_fmt(x)}" y2="{_fmt(_MARGIN_T + plot_h)}" '
                     f'stroke="#dddddd" stroke-width="1"/>')
        parts.append(f'<text x="{_fmt(x)}" y="{_fmt(_MARGIN_T + plot_h + 16)}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="10">{format(tx, ".4g")}</text>')
    for ty in _ticks(y_lo, y_hi):
        y = py(ty)
        parts.append(f'<line x1="{_fmt(_MARGIN_L)}" y1="{_fmt(y)}" '
                     f'x2="{_fmt(_MARGIN_L + plot_w)}" y2="{_fmt(y)}" '
                     f'stroke="#dddddd" stroke-width="1"/>')
        parts.append(f'<text x="{_fmt(_MARGIN_L - 6)}" y="{_fmt(y + 3)}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="10">{format(ty, ".4g")}</text>')
    parts.append(f'<rect x="{_fmt(_MARGIN_L)}" y="{_fmt(_MARGIN_T)}" '
                 f'width="{_fmt(plot_w)}" height="{_fmt(plot_h)}" '
                 f'fill="none" stroke="#444444"/>')
    parts.append(f'<text x="{width / 2:.1f}" y="{height - 8}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12">{_esc(xlabel)}</text>')
    parts.append(f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 14 {height / 2:.1f})">'
                 f'{_esc(ylabel)}</text>')

    for idx, s in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        points = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}"
                          for x, y in zip(s.xs, s.ys)
                          if math.isfinite(x) and math.isfinite(y))
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        parts.append(f'<polyline points="{points}" fill="none" '
                     f'stroke="{color}" stroke-width="1.6"{dash}/>')
        ly = _MARGIN_T + 14 + 14 * idx
        lx = _MARGIN_L + plot_w - 150
        parts.append(f'<line x1="{_fmt(lx)}" y1="{_fmt(ly - 4)}" '
                     f'x2="{_fmt(lx + 22)}" y2="{_fmt(ly - 4)}" '
                     f'stroke="{color}" stroke-width="1.6"{dash}/>')
        parts.append(f'<text x="{_fmt(lx + 27)}" y="{_fmt(ly)}" '
                     f'font-family="sans-serif" font-size="10">'
                     f'{_esc(s.label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def heat_grid(values, xs, ys, *, title: str, xlabel: str, ylabel: str,
              colors: dict | None = None, width: int = 560,
              height: int = 520) -> str:
    """Render a dense grid of small categorical values as coloured cells.

    ``values[j][i]`` is the cell at ``(xs[i], ys[j])``; the colour map
    defaults to white/blue for 0/1.
    """
    palette = {0: "#f4f6f8", 1: "#2a6fb0", 2: "#d1495b"}
    if colors:
        palette.update(colors)
    n_x = len(xs)
    n_y = len(ys)
    if n_x == 0 or n_y == 0:
        raise ValueError("heat grid needs a nonempty grid")
    plot_w = width - _MARGIN_L - _MARGIN_R
    plot_h = height - _MARGIN_T - _MARGIN_B
    cell_w = plot_w / n_x
    cell_h = plot_h / n_y

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{_esc(title)}</text>',
    ]
    for j in range(n_y):
        # row j drawn bottom-up so the y axis increases upward
        y = _MARGIN_T + plot_h - (j + 1) * cell_h
        row = values[j]
        run_start = 0
        while run_start < n_x:
            run_end = run_start
            v = row[run_start]
            while run_end + 1 < n_x and row[run_end + 1] == v:
                run_end += 1
            x = _MARGIN_L + run_start * cell_w
            w = (run_end - run_start + 1) * cell_w
            parts.append(f'<rect x="{_fmt(x)}" y="{_fmt(y)}" '
                         f'width="{_fmt(w)}" height="{_fmt(cell_h + 0.5)}" '
                         f'fill="{palette.get(int(v), "#999999")}"/>')
            run_start = run_end + 1
    parts.append(f'<rect x="{_fmt(_MARGIN_L)}" y="{_fmt(_MARGIN_T)}" '
                 f'width="{_fmt(plot_w)}" height="{_fmt(plot_h)}" '
                 f'fill="none" stroke="#444444"/>')
    for i in range(0, n_x, max(1, n_x // 5)):
        x = _MARGIN_L + (i + 0.5) * cell_w
        parts.append(f'<text x="{_fmt(x)}" y="{_fmt(_MARGIN_T + plot_h + 16)}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="10">{format(xs[i], ".4g")}</text>')
    for j in range(0, n_y, max(1, n_y // 5)):
        y = _MARGIN_T + plot_h - (j + 0.5) * cell_h
        parts.append(f'<text x="{_fmt(_MARGIN_L - 6)}" y="{_fmt(y + 3)}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="10">{format(ys[j], ".4g")}</text>')
    parts.append(f'<text x="{width / 2:.1f}" y="{height - 8}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12">{_esc(xlabel)}</text>')
    parts.append(f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 14 {height / 2:.1f})">'
                 f'{_esc(ylabel)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
