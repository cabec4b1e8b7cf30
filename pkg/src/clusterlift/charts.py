"""Minimal SVG line charts (polylines + error bars), no plotting deps.

Output is deterministic: fixed float formatting, no timestamps, no
randomness.  Good enough for sweep reports; not a plotting library.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

from .domain import ValidationError

__all__ = ["PALETTE", "Panel", "Series", "assign_colors", "render_figure"]

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
)

_PLOT_W = 400
_PLOT_H = 300
_MARGIN_L = 64
_MARGIN_R = 16
_MARGIN_T = 34
_MARGIN_B = 46
_LEGEND_W = 210


def _c(v: float) -> str:
    """Pixel coordinate with fixed precision."""
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.4g}"


@dataclass(frozen=True)
class Series:
    label: str
    x: tuple[float, ...]
    y: tuple[float, ...]
    err: tuple[float, ...] | None = None
    color: str = PALETTE[0]

    def __post_init__(self) -> None:
        if len(self.x) != len(self.y):
            raise ValidationError("series x and y lengths differ")
        if self.err is not None and len(self.err) != len(self.x):
            raise ValidationError("series err length differs from x")


@dataclass(frozen=True)
class Panel:
    title: str
    x_label: str
    y_label: str
    series: tuple[Series, ...]


def assign_colors(labels: Sequence[str]) -> dict[str, str]:
    """Stable label -> color map, cycling the palette in given order."""
    out: dict[str, str] = {}
    for label in labels:
        if label not in out:
            out[label] = PALETTE[len(out) % len(PALETTE)]
    return out


def _data_range(values: list[float]) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        pad = abs(lo) * 0.05 or 1.0
    else:
        pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def _panel_svg(panel: Panel, x0: int, y0: int) -> list[str]:
    left = x0 + _MARGIN_L
    top = y0 + _MARGIN_T
    w, h = _PLOT_W, _PLOT_H

    xs = [v for s in panel.series for v in s.x]
    ys: list[float] = []
    for s in panel.series:
        for i, v in enumerate(s.y):
            e = s.err[i] if s.err is not None else 0.0
            ys.extend((v - e, v + e))
    if not xs:
        raise ValidationError(f"panel {panel.title!r} has no data")
    xlo, xhi = _data_range(xs)
    ylo, yhi = _data_range(ys)

    def px(v: float) -> float:
        return left + (v - xlo) / (xhi - xlo) * w

    def py(v: float) -> float:
        return top + h - (v - ylo) / (yhi - ylo) * h

    parts = [
        f'<rect x="{left}" y="{top}" width="{w}" height="{h}" '
        'fill="white" stroke="#444444" stroke-width="1"/>'
    ]
    # axis ticks and grid lines
    for i in range(5):
        tx = xlo + (xhi - xlo) * i / 4
        ty = ylo + (yhi - ylo) * i / 4
        gx, gy = px(tx), py(ty)
        parts.append(
            f'<line x1="{_c(gx)}" y1="{top}" x2="{_c(gx)}" y2="{top + h}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<line x1="{left}" y1="{_c(gy)}" x2="{left + w}" y2="{_c(gy)}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_c(gx)}" y="{top + h + 16}" font-size="11" '
            f'text-anchor="middle">{escape(_tick_label(tx))}</text>'
        )
        parts.append(
            f'<text x="{left - 6}" y="{_c(gy + 4)}" font-size="11" '
            f'text-anchor="end">{escape(_tick_label(ty))}</text>'
        )
    # zero line when visible
    if ylo < 0.0 < yhi:
        gy = py(0.0)
        parts.append(
            f'<line x1="{left}" y1="{_c(gy)}" x2="{left + w}" y2="{_c(gy)}" '
            'stroke="#999999" stroke-width="1" stroke-dasharray="4,3"/>'
        )

    for s in panel.series:
        pts = " ".join(f"{_c(px(a))},{_c(py(b))}" for a, b in zip(s.x, s.y))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{s.color}" '
            'stroke-width="1.6"/>'
        )
        if s.err is not None:
            for a, b, e in zip(s.x, s.y, s.err):
                gx, lo_y, hi_y = px(a), py(b - e), py(b + e)
                parts.append(
                    f'<line x1="{_c(gx)}" y1="{_c(lo_y)}" x2="{_c(gx)}" '
                    f'y2="{_c(hi_y)}" stroke="{s.color}" stroke-width="1"/>'
                )
                for yy in (lo_y, hi_y):
                    parts.append(
                        f'<line x1="{_c(gx - 3)}" y1="{_c(yy)}" '
                        f'x2="{_c(gx + 3)}" y2="{_c(yy)}" '
                        f'stroke="{s.color}" stroke-width="1"/>'
                    )
        for a, b in zip(s.x, s.y):
            parts.append(
                f'<circle cx="{_c(px(a))}" cy="{_c(py(b))}" r="2.2" '
                f'fill="{s.color}"/>'
            )

    parts.append(
        f'<text x="{left + w / 2}" y="{y0 + 20}" font-size="13" '
        f'text-anchor="middle" font-weight="bold">{escape(panel.title)}</text>'
    )
    parts.append(
        f'<text x="{left + w / 2}" y="{top + h + 34}" font-size="12" '
        f'text-anchor="middle">{escape(panel.x_label)}</text>'
    )
    parts.append(
        f'<text x="{x0 + 14}" y="{top + h / 2}" font-size="12" '
        f'text-anchor="middle" '
        f'transform="rotate(-90 {x0 + 14} {top + h / 2})">'
        f"{escape(panel.y_label)}</text>"
    )
    return parts


def render_figure(panels: Sequence[Panel], title: str = "") -> str:
    """Render panels side by side with a shared legend on the right."""
    if not panels:
        raise ValidationError("figure needs at least one panel")
    panel_w = _MARGIN_L + _PLOT_W + _MARGIN_R
    width = panel_w * len(panels) + _LEGEND_W
    height = _MARGIN_T + _PLOT_H + _MARGIN_B + (24 if title else 0)
    y0 = 24 if title else 0

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2}" y="17" font-size="15" text-anchor="middle" '
            f'font-weight="bold">{escape(title)}</text>'
        )
    for i, panel in enumerate(panels):
        parts.extend(_panel_svg(panel, i * panel_w, y0))

    labels: list[tuple[str, str]] = []
    seen = set()
    for panel in panels:
        for s in panel.series:
            if s.label not in seen:
                seen.add(s.label)
                labels.append((s.label, s.color))
    lx = panel_w * len(panels) + 12
    ly = y0 + _MARGIN_T + 6
    parts.append(
        f'<text x="{lx}" y="{ly - 10}" font-size="12" '
        'font-weight="bold">legend</text>'
    )
    for j, (label, color) in enumerate(labels):
        yy = ly + 8 + j * 18
        parts.append(
            f'<line x1="{lx}" y1="{yy}" x2="{lx + 22}" y2="{yy}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{lx + 28}" y="{yy + 4}" font-size="11">'
            f"{escape(label)}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
