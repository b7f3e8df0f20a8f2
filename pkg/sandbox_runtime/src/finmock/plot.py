"""Deterministic chart rendering.

The native output is SVG drawn with pure integer arithmetic so the bytes
(and therefore artifact sizes recorded in trajectory logs) are identical on
every platform. Writing ``.png`` delegates to matplotlib when it is
installed; PNG bytes are then platform-dependent and not suitable for
golden fixtures.
"""

from __future__ import annotations

from decimal import Decimal
from pathlib import Path

from .errors import BadParamError, EmptyTableError
from .table import MockTable

_WIDTH, _HEIGHT = 480, 260
_MARGIN_X, _MARGIN_Y = 50, 30
_PLOT_W = _WIDTH - 2 * _MARGIN_X
_PLOT_H = _HEIGHT - 2 * _MARGIN_Y


def _svg_points(values: list[int]) -> str:
    lo, hi = min(values), max(values)
    span = max(hi - lo, 1)
    n = len(values)
    points = []
    for i, value in enumerate(values):
        x = _MARGIN_X + (i * _PLOT_W) // max(n - 1, 1)
        y = _MARGIN_Y + ((hi - value) * _PLOT_H) // span
        points.append(f"{x},{y}")
    return " ".join(points)


def render_close_svg(table: MockTable) -> str:
    if len(table) == 0:
        raise EmptyTableError("cannot plot an empty table")
    closes = [int(value.scaleb(2)) for value in table.column("close")]
    dates = table.column("date")
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<rect x="{_MARGIN_X}" y="{_MARGIN_Y}" width="{_PLOT_W}" height="{_PLOT_H}" '
        f'fill="none" stroke="black"/>',
        f'<polyline points="{_svg_points(closes)}" fill="none" stroke="steelblue" '
        f'stroke-width="2"/>',
        f'<text x="{_MARGIN_X}" y="{_HEIGHT - 8}" font-size="12">'
        f"close {dates[0]} to {dates[-1]}</text>",
        "</svg>",
    ]
    return "\n".join(lines) + "\n"


def save_plot(table: MockTable, path: str) -> str:
    """Write a close-price chart; the format follows the file extension."""
    if len(table) == 0:
        raise EmptyTableError("cannot plot an empty table")
    target = Path(path)
    suffix = target.suffix.lower()
    if suffix == ".svg":
        target.write_text(render_close_svg(table), encoding="utf-8")
        return str(target)
    if suffix == ".png":
        try:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError:
            raise BadParamError(
                "png output needs matplotlib; use an .svg path for the built-in renderer"
            ) from None
        figure, axis = plt.subplots(figsize=(6, 3))
        axis.plot(table.column("date"), [float(v) for v in table.column("close")])
        axis.set_ylabel("close")
        figure.autofmt_xdate()
        figure.savefig(target, format="png")
        plt.close(figure)
        return str(target)
    raise BadParamError(f"unsupported plot format: {suffix or '(none)'}")
