"""Minimal deterministic SVG line plots (fixed 800x600 canvas, no timestamps)."""

from __future__ import annotations

import math

WIDTH, HEIGHT = 800, 600
MARGIN = 60


def _fmt(value: float) -> str:
    return repr(float(value))


def _scale(values, log: bool):
    if log:
        if any(v <= 0 for v in values):
            raise ValueError("log axis requires strictly positive values")
        values = [math.log10(v) for v in values]
    lo, hi = min(values), max(values)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return values, lo, hi


def emit_svg(series, path: str, title: str = "", log_x: bool = False,
             log_y: bool = False) -> None:
    """Write a standalone single-line SVG plot of (x, y) pairs.

    ``series`` is a sequence of at least two points; output is byte
    deterministic for identical inputs.
    """
    points = [(float(x), float(y)) for x, y in series]
    if len(points) < 2:
        raise ValueError("need at least 2 points to plot")
    xs, x_lo, x_hi = _scale([p[0] for p in points], log_x)
    ys, y_lo, y_hi = _scale([p[1] for p in points], log_y)

    def px(x):
        return MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2 * MARGIN)

    def py(y):
        return HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2 * MARGIN)

    poly = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
        f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="black"/>',
    ]
    if title:
        lines.append(
            f'<text x="{WIDTH // 2}" y="30" text-anchor="middle" '
            f'font-family="monospace" font-size="16">{title}</text>'
        )
    axis_labels = [
        (MARGIN, HEIGHT - MARGIN + 20, x_lo, log_x, "start"),
        (WIDTH - MARGIN, HEIGHT - MARGIN + 20, x_hi, log_x, "end"),
        (MARGIN - 8, HEIGHT - MARGIN, y_lo, log_y, "end"),
        (MARGIN - 8, MARGIN + 10, y_hi, log_y, "end"),
    ]
    for x, y, value, logged, anchor in axis_labels:
        shown = 10.0**value if logged else value
        lines.append(
            f'<text x="{x}" y="{y}" text-anchor="{anchor}" '
            f'font-family="monospace" font-size="12">{shown:.6g}</text>'
        )
    lines.append(
        f'<polyline points="{poly}" fill="none" stroke="steelblue" stroke-width="1.5"/>'
    )
    lines.append("</svg>")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
