"""Tiny deterministic SVG writer for the engine's diagnostic plots.

Static markup only: fixed palette, fixed float formatting, no timestamps and
no external renderer, so identical inputs always produce identical bytes.
"""

from __future__ import annotations

import math
from typing import Sequence

PALETTE = (
    "#4063d8", "#d85c40", "#3f9b6e", "#8e44ad", "#c7a531",
    "#16a0b8", "#b8336a", "#6b7280", "#8c5a2b", "#2f4b7c",
)

_MARGIN = 54.0
_WIDTH = 640.0
_HEIGHT = 420.0


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _color(i: int) -> str:
    return PALETTE[i % len(PALETTE)]


def _finite(values: Sequence[float]) -> list[float]:
    return [v for v in values if math.isfinite(v)]


class _Canvas:
    def __init__(self, title: str, width: float = _WIDTH, height: float = _HEIGHT):
        self.width = width
        self.height = height
        self.parts: list[str] = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(width)}" '
            f'height="{int(height)}" viewBox="0 0 {int(width)} {int(height)}">',
            f'<rect width="{int(width)}" height="{int(height)}" fill="white"/>',
            f'<text x="{_fmt(width / 2)}" y="20" text-anchor="middle" '
            f'font-family="monospace" font-size="14">{escape(title)}</text>',
        ]

    def add(self, element: str) -> None:
        self.parts.append(element)

    def finish(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def escape(text: str) -> str:
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


class _Scale:
    """Affine map from data space to pixel space with padding for flat ranges."""

    def __init__(self, values: Sequence[float], out_lo: float, out_hi: float):
        finite = _finite(values)
        lo = min(finite) if finite else 0.0
        hi = max(finite) if finite else 1.0
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        self.lo, self.hi = lo, hi
        self.out_lo, self.out_hi = out_lo, out_hi

    def __call__(self, v: float) -> float:
        frac = (v - self.lo) / (self.hi - self.lo)
        frac = min(max(frac, 0.0), 1.0) if math.isfinite(frac) else 0.0
        return self.out_lo + frac * (self.out_hi - self.out_lo)


def _axes(canvas: _Canvas, sx: _Scale, sy: _Scale, xlabel: str, ylabel: str) -> None:
    x0, x1 = _MARGIN, canvas.width - _MARGIN / 2
    y0, y1 = canvas.height - _MARGIN, _MARGIN / 2 + 10
    canvas.add(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" y2="{_fmt(y0)}" stroke="black"/>'
    )
    canvas.add(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x0)}" y2="{_fmt(y1)}" stroke="black"/>'
    )
    canvas.add(
        f'<text x="{_fmt((x0 + x1) / 2)}" y="{_fmt(canvas.height - 14)}" text-anchor="middle" '
        f'font-family="monospace" font-size="11">{escape(xlabel)}</text>'
    )
    canvas.add(
        f'<text x="16" y="{_fmt((y0 + y1) / 2)}" text-anchor="middle" font-family="monospace" '
        f'font-size="11" transform="rotate(-90 16 {_fmt((y0 + y1) / 2)})">{escape(ylabel)}</text>'
    )
    for frac in (0.0, 0.5, 1.0):
        vx = sx.lo + frac * (sx.hi - sx.lo)
        vy = sy.lo + frac * (sy.hi - sy.lo)
        canvas.add(
            f'<text x="{_fmt(sx(vx))}" y="{_fmt(y0 + 14)}" text-anchor="middle" '
            f'font-family="monospace" font-size="9">{_fmt(vx)}</text>'
        )
        canvas.add(
            f'<text x="{_fmt(x0 - 6)}" y="{_fmt(sy(vy) + 3)}" text-anchor="end" '
            f'font-family="monospace" font-size="9">{_fmt(vy)}</text>'
        )


def _legend(canvas: _Canvas, labels: Sequence[str]) -> None:
    for i, label in enumerate(labels):
        y = _MARGIN / 2 + 12 + 13 * i
        x = canvas.width - _MARGIN * 2.6
        canvas.add(f'<rect x="{_fmt(x)}" y="{_fmt(y - 8)}" width="9" height="9" fill="{_color(i)}"/>')
        canvas.add(
            f'<text x="{_fmt(x + 13)}" y="{_fmt(y)}" font-family="monospace" '
            f'font-size="10">{escape(label)}</text>'
        )


def line_chart(
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    title: str,
    xlabel: str = "x",
    ylabel: str = "y",
) -> str:
    """Polyline chart; one (label, xs, ys) triple per series."""
    canvas = _Canvas(title)
    all_x = [v for _, xs, _ in series for v in xs]
    all_y = [v for _, _, ys in series for v in ys]
    sx = _Scale(all_x, _MARGIN, canvas.width - _MARGIN / 2)
    sy = _Scale(all_y, canvas.height - _MARGIN, _MARGIN / 2 + 10)
    _axes(canvas, sx, sy, xlabel, ylabel)
    for i, (label, xs, ys) in enumerate(series):
        pts = " ".join(
            f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(xs, ys) if math.isfinite(y)
        )
        if pts:
            canvas.add(
                f'<polyline points="{pts}" fill="none" stroke="{_color(i)}" stroke-width="1.5"/>'
            )
    _legend(canvas, [label for label, _, _ in series])
    return canvas.finish()


def scatter_chart(
    groups: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    title: str,
    xlabel: str = "x",
    ylabel: str = "y",
) -> str:
    """Scatter plot; one (label, xs, ys) triple per colored group."""
    canvas = _Canvas(title)
    all_x = [v for _, xs, _ in groups for v in xs]
    all_y = [v for _, _, ys in groups for v in ys]
    sx = _Scale(all_x, _MARGIN, canvas.width - _MARGIN / 2)
    sy = _Scale(all_y, canvas.height - _MARGIN, _MARGIN / 2 + 10)
    _axes(canvas, sx, sy, xlabel, ylabel)
    for i, (label, xs, ys) in enumerate(groups):
        for x, y in zip(xs, ys):
            if math.isfinite(x) and math.isfinite(y):
                canvas.add(
                    f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="2.4" '
                    f'fill="{_color(i)}" fill-opacity="0.7"/>'
                )
    _legend(canvas, [label for label, _, _ in groups])
    return canvas.finish()


def bar_chart(labels: Sequence[str], values: Sequence[float], title: str, ylabel: str = "") -> str:
    canvas = _Canvas(title)
    x0, x1 = _MARGIN, canvas.width - _MARGIN / 2
    y0 = canvas.height - _MARGIN
    sy = _Scale([0.0, *values], y0, _MARGIN / 2 + 10)
    slot = (x1 - x0) / max(len(values), 1)
    for i, (label, value) in enumerate(zip(labels, values)):
        bx = x0 + i * slot + slot * 0.15
        top = sy(value)
        canvas.add(
            f'<rect x="{_fmt(bx)}" y="{_fmt(min(top, sy(0.0)))}" width="{_fmt(slot * 0.7)}" '
            f'height="{_fmt(abs(sy(0.0) - top))}" fill="{_color(i)}"/>'
        )
        canvas.add(
            f'<text x="{_fmt(bx + slot * 0.35)}" y="{_fmt(y0 + 14)}" text-anchor="middle" '
            f'font-family="monospace" font-size="9">{escape(label)}</text>'
        )
        canvas.add(
            f'<text x="{_fmt(bx + slot * 0.35)}" y="{_fmt(min(top, sy(0.0)) - 4)}" '
            f'text-anchor="middle" font-family="monospace" font-size="9">{value:.3g}</text>'
        )
    canvas.add(
        f'<text x="16" y="{_fmt(canvas.height / 2)}" text-anchor="middle" font-family="monospace" '
        f'font-size="11" transform="rotate(-90 16 {_fmt(canvas.height / 2)})">{escape(ylabel)}</text>'
    )
    return canvas.finish()


def parallel_chart(plot_data: dict, title: str) -> str:
    """Parallel-coordinates rendering of :func:`results.parallel_plot_data` output."""
    canvas = _Canvas(title)
    names = plot_data["features"]
    lines = plot_data["lines"]
    x0, x1 = _MARGIN, canvas.width - _MARGIN / 2
    y0, y1 = canvas.height - _MARGIN, _MARGIN / 2 + 10
    step = (x1 - x0) / max(len(names) - 1, 1)
    for i, name in enumerate(names):
        ax = x0 + i * step
        canvas.add(f'<line x1="{_fmt(ax)}" y1="{_fmt(y0)}" x2="{_fmt(ax)}" y2="{_fmt(y1)}" stroke="#999"/>')
        canvas.add(
            f'<text x="{_fmt(ax)}" y="{_fmt(y0 + 14)}" text-anchor="middle" '
            f'font-family="monospace" font-size="9">{escape(name)}</text>'
        )
    for line in lines:
        interest = line["label"] == "x_interest"
        pts = " ".join(
            f"{_fmt(x0 + i * step)},{_fmt(y0 + (y1 - y0) * v)}"
            for i, v in enumerate(line["values"])
        )
        stroke = "#1f5fd0" if interest else "#9aa0a6"
        width = "2.5" if interest else "1.2"
        canvas.add(f'<polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="{width}"/>')
    return canvas.finish()


def surface_chart(plot_data: dict, title: str) -> str:
    """Heatmap rendering of :func:`results.surface_plot_data` output."""
    canvas = _Canvas(title)
    grid_a, grid_b = plot_data["grid_a"], plot_data["grid_b"]
    scores = plot_data["scores"]
    flat = [v for row in scores for v in row]
    lo, hi = (min(flat), max(flat)) if flat else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    x0, x1 = _MARGIN, canvas.width - _MARGIN / 2
    y0, y1 = canvas.height - _MARGIN, _MARGIN / 2 + 10
    cw = (x1 - x0) / max(len(grid_a), 1)
    ch = (y0 - y1) / max(len(grid_b), 1)

    def shade(v: float) -> str:
        t = (v - lo) / span
        r = int(40 + 200 * t)
        g = int(60 + 120 * (1 - t))
        b = int(200 - 140 * t)
        return f"rgb({r},{g},{b})"

    for bi, row in enumerate(scores):
        for ai, v in enumerate(row):
            canvas.add(
                f'<rect x="{_fmt(x0 + ai * cw)}" y="{_fmt(y0 - (bi + 1) * ch)}" '
                f'width="{_fmt(cw + 0.5)}" height="{_fmt(ch + 0.5)}" fill="{shade(v)}"/>'
            )

    def numeric_positions(grid: Sequence, horizontal: bool) -> _Scale:
        values = [float(v) if not isinstance(v, str) else i for i, v in enumerate(grid)]
        return _Scale(values, x0, x1) if horizontal else _Scale(values, y0, y1)

    sa = numeric_positions(grid_a, True)
    sb = numeric_positions(grid_b, False)
    for point in plot_data["points"]:
        a, b = point["a"], point["b"]
        av = float(a) if not isinstance(a, str) else grid_a.index(a)
        bv = float(b) if not isinstance(b, str) else grid_b.index(b)
        fill = "white" if point["kind"] == "x_interest" else "black"
        canvas.add(
            f'<circle cx="{_fmt(sa(av))}" cy="{_fmt(sb(bv))}" r="4" fill="{fill}" stroke="black"/>'
        )
    for v in plot_data["rug_a"]:
        if not isinstance(v, str):
            canvas.add(
                f'<line x1="{_fmt(sa(float(v)))}" y1="{_fmt(y0)}" x2="{_fmt(sa(float(v)))}" '
                f'y2="{_fmt(y0 + 5)}" stroke="black" stroke-width="0.6"/>'
            )
    for v in plot_data["rug_b"]:
        if not isinstance(v, str):
            canvas.add(
                f'<line x1="{_fmt(x0 - 5)}" y1="{_fmt(sb(float(v)))}" x2="{_fmt(x0)}" '
                f'y2="{_fmt(sb(float(v)))}" stroke="black" stroke-width="0.6"/>'
            )
    canvas.add(
        f'<text x="{_fmt((x0 + x1) / 2)}" y="{_fmt(canvas.height - 14)}" text-anchor="middle" '
        f'font-family="monospace" font-size="11">{escape(plot_data["feature_a"])}</text>'
    )
    canvas.add(
        f'<text x="16" y="{_fmt((y0 + y1) / 2)}" text-anchor="middle" font-family="monospace" '
        f'font-size="11" transform="rotate(-90 16 {_fmt((y0 + y1) / 2)})">'
        f'{escape(plot_data["feature_b"])}</text>'
    )
    return canvas.finish()
