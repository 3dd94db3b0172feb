"""Minimal SVG emitters for run analysis: ternary phase plots of the
rolling commitment mix, line charts for rates and Q-value probes, and
outcome-coloured episode scatters.

Everything is plain string assembly over a fixed coordinate box; no
plotting library is involved. The documents carry class attributes
("phase-path", "start-marker", "end-marker", ...) so tools and tests can
locate elements structurally instead of scraping pixels.

Phase-plot geometry: an equilateral triangle with corner A at the top,
B bottom-left, C bottom-right. A simplex point (a, b, c) maps to the
barycentric combination a*A + b*B + c*C of the corner coordinates.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "PHASE_WIDTH",
    "PHASE_HEIGHT",
    "PHASE_MARGIN",
    "triangle_corners",
    "barycentric_to_xy",
    "phase_plot",
    "emit_phase_plot",
    "line_chart",
    "scatter_plot",
]

PHASE_WIDTH = 640
PHASE_MARGIN = 60
_SIDE = PHASE_WIDTH - 2 * PHASE_MARGIN
_TRI_HEIGHT = _SIDE * math.sqrt(3.0) / 2.0
PHASE_HEIGHT = int(2 * PHASE_MARGIN + _TRI_HEIGHT)

AGENT_COLORS = ("#2b6cb0", "#b07a2b")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def triangle_corners() -> dict[str, tuple[float, float]]:
    """Pixel coordinates of the simplex corners, A on top."""
    top = float(PHASE_MARGIN)
    base = PHASE_MARGIN + _TRI_HEIGHT
    return {
        "A": (PHASE_WIDTH / 2.0, top),
        "B": (float(PHASE_MARGIN), base),
        "C": (float(PHASE_WIDTH - PHASE_MARGIN), base),
    }


def barycentric_to_xy(point: Sequence[float]) -> tuple[float, float]:
    """Map one 3-simplex point (fractions of A, B, C) into the triangle."""
    a, b, c = (float(v) for v in point)
    total = a + b + c
    if not math.isfinite(total) or abs(total - 1.0) > 1e-6:
        raise ValueError(f"not a simplex point: {point!r}")
    corners = triangle_corners()
    x = a * corners["A"][0] + b * corners["B"][0] + c * corners["C"][0]
    y = a * corners["A"][1] + b * corners["B"][1] + c * corners["C"][1]
    return x, y


def _svg_open(width: int, height: int, title: str | None) -> list[str]:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}" '
        f'font-family="Helvetica, Arial, sans-serif">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.0f}" y="24" text-anchor="middle" '
            f'font-size="16">{_escape(title)}</text>'
        )
    return parts


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )


def _finite_rows(seq: np.ndarray) -> np.ndarray:
    return np.isfinite(seq).all(axis=1)


def phase_plot(
    points: np.ndarray,
    names: Sequence[str] = ("agent 1", "agent 2"),
    title: str | None = None,
) -> str:
    """Ternary trajectory plot over the A/B/C simplex.

    ``points`` is (positions, n_agents, 3), the shape produced by
    rolling_action_distribution; NaN rows (windows with nothing
    classified) break the polyline. Each agent gets a polyline, a black
    square at its first defined window and a red dot at its last.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 3 or points.shape[2] != 3:
        raise ValueError("expected points shaped (positions, agents, 3)")
    if points.shape[0] < 1:
        raise ValueError("empty sequence")
    n_agents = points.shape[1]
    if len(names) != n_agents:
        raise ValueError("one name per agent")

    corners = triangle_corners()
    parts = _svg_open(PHASE_WIDTH, PHASE_HEIGHT, title)
    (ax, ay), (bx, by), (cx, cy) = (
        corners["A"], corners["B"], corners["C"],
    )
    parts.append(
        f'<polygon class="simplex-edge" points="{_fmt(ax)},{_fmt(ay)} '
        f'{_fmt(bx)},{_fmt(by)} {_fmt(cx)},{_fmt(cy)}" fill="none" '
        f'stroke="#444" stroke-width="1.5"/>'
    )
    parts.append(
        f'<text class="corner-label" x="{_fmt(ax)}" y="{_fmt(ay - 12)}" '
        f'text-anchor="middle" font-size="15">A</text>'
    )
    parts.append(
        f'<text class="corner-label" x="{_fmt(bx - 6)}" y="{_fmt(by + 18)}" '
        f'text-anchor="middle" font-size="15">B</text>'
    )
    parts.append(
        f'<text class="corner-label" x="{_fmt(cx + 6)}" y="{_fmt(cy + 18)}" '
        f'text-anchor="middle" font-size="15">C</text>'
    )

    for agent in range(n_agents):
        seq = points[:, agent, :]
        finite = _finite_rows(seq)
        if not finite.any():
            continue
        color = AGENT_COLORS[agent % len(AGENT_COLORS)]
        # contiguous finite runs become separate polylines
        run: list[str] = []
        for ok, row in zip(finite, seq):
            if ok:
                x, y = barycentric_to_xy(row)
                run.append(f"{_fmt(x)},{_fmt(y)}")
            elif run:
                parts.append(_polyline(run, agent, color))
                run = []
        if run:
            parts.append(_polyline(run, agent, color))

        idx = np.flatnonzero(finite)
        sx, sy = barycentric_to_xy(seq[idx[0]])
        ex, ey = barycentric_to_xy(seq[idx[-1]])
        parts.append(
            f'<rect class="start-marker" data-agent="{agent}" '
            f'x="{_fmt(sx - 4)}" y="{_fmt(sy - 4)}" width="8" height="8" '
            f'fill="black"/>'
        )
        parts.append(
            f'<circle class="end-marker" data-agent="{agent}" '
            f'cx="{_fmt(ex)}" cy="{_fmt(ey)}" r="4.5" fill="red"/>'
        )
        parts.append(
            f'<text class="legend" x="{PHASE_MARGIN}" '
            f'y="{20 + 18 * agent}" font-size="13" fill="{color}">'
            f"{_escape(names[agent])}</text>"
        )

    parts.append("</svg>")
    return "\n".join(parts)


def _polyline(coords: list[str], agent: int, color: str) -> str:
    return (
        f'<polyline class="phase-path" data-agent="{agent}" '
        f'points="{" ".join(coords)}" fill="none" stroke="{color}" '
        f'stroke-width="1.2" opacity="0.85"/>'
    )


def emit_phase_plot(
    points: np.ndarray,
    path: str | Path,
    names: Sequence[str] = ("agent 1", "agent 2"),
    title: str | None = None,
) -> Path:
    path = Path(path)
    path.write_text(phase_plot(points, names, title))
    return path


# --------------------------------------------------------------------------
# rectangular charts

_CHART_W = 720
_CHART_H = 420
_CHART_ML = 70   # left margin holds y tick labels
_CHART_MB = 50
_CHART_MT = 40
_CHART_MR = 30

SERIES_COLORS = (
    "#2b6cb0", "#b02b2b", "#2b8a4b", "#b07a2b", "#6d2bb0", "#2b9fb0",
)


def _axis_range(lo: float, hi: float) -> tuple[float, float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("series contain no finite values")
    if lo == hi:
        pad = 1.0 if lo == 0 else abs(lo) * 0.1
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def _chart_transform(n: int, ylo: float, yhi: float):
    plot_w = _CHART_W - _CHART_ML - _CHART_MR
    plot_h = _CHART_H - _CHART_MT - _CHART_MB

    def to_xy(i: float, v: float) -> tuple[float, float]:
        x = _CHART_ML + (i / max(n - 1, 1)) * plot_w
        y = _CHART_MT + (1.0 - (v - ylo) / (yhi - ylo)) * plot_h
        return x, y

    return to_xy


def _chart_frame(parts, to_xy, n, ylo, yhi, x_label, y_label, x_tick=None):
    if x_tick is None:
        x_tick = lambda frac: f"{frac * max(n - 1, 1):.0f}"
    x0, y0 = to_xy(0, ylo)
    x1, _ = to_xy(max(n - 1, 1), ylo)
    _, y1 = to_xy(0, yhi)
    parts.append(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" '
        f'y2="{_fmt(y0)}" stroke="#333"/>'
    )
    parts.append(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x0)}" '
        f'y2="{_fmt(y1)}" stroke="#333"/>'
    )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = ylo + frac * (yhi - ylo)
        _, ty = to_xy(0, v)
        parts.append(
            f'<text class="y-tick" x="{_CHART_ML - 8}" y="{_fmt(ty + 4)}" '
            f'text-anchor="end" font-size="11">{v:.3g}</text>'
        )
        parts.append(
            f'<line x1="{_CHART_ML}" y1="{_fmt(ty)}" '
            f'x2="{_CHART_W - _CHART_MR}" y2="{_fmt(ty)}" '
            f'stroke="#ddd" stroke-width="0.6"/>'
        )
    for frac in (0.0, 0.5, 1.0):
        tx, _ = to_xy(frac * max(n - 1, 1), ylo)
        parts.append(
            f'<text class="x-tick" x="{_fmt(tx)}" y="{_CHART_H - _CHART_MB + 18}" '
            f'text-anchor="middle" font-size="11">{x_tick(frac)}</text>'
        )
    parts.append(
        f'<text x="{(_CHART_ML + _CHART_W - _CHART_MR) / 2:.0f}" '
        f'y="{_CHART_H - 10}" text-anchor="middle" font-size="13">'
        f"{_escape(x_label)}</text>"
    )
    parts.append(
        f'<text x="18" y="{(_CHART_MT + _CHART_H - _CHART_MB) / 2:.0f}" '
        f'text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {(_CHART_MT + _CHART_H - _CHART_MB) / 2:.0f})">'
        f"{_escape(y_label)}</text>"
    )


def line_chart(
    series: Mapping[str, Sequence[float]],
    y_range: tuple[float, float] | None = None,
    title: str | None = None,
    x_label: str = "episode",
    y_label: str = "value",
) -> str:
    """Overlaid line series sharing one x axis (sample index)."""
    if not series:
        raise ValueError("no series given")
    arrays = {k: np.asarray(v, dtype=np.float64) for k, v in series.items()}
    n = max(a.size for a in arrays.values())
    if n < 1:
        raise ValueError("empty series")
    if y_range is None:
        finite = np.concatenate(
            [a[np.isfinite(a)] for a in arrays.values()]
        )
        ylo, yhi = _axis_range(
            float(finite.min(initial=np.inf)),
            float(finite.max(initial=-np.inf)),
        )
    else:
        ylo, yhi = y_range
        if not ylo < yhi:
            raise ValueError("y_range must be (low, high) with low < high")

    to_xy = _chart_transform(n, ylo, yhi)
    parts = _svg_open(_CHART_W, _CHART_H, title)
    _chart_frame(parts, to_xy, n, ylo, yhi, x_label, y_label)

    for k, (name, arr) in enumerate(arrays.items()):
        color = SERIES_COLORS[k % len(SERIES_COLORS)]
        coords = []
        for i, v in enumerate(arr):
            if math.isfinite(v):
                x, y = to_xy(i, float(np.clip(v, ylo, yhi)))
                coords.append(f"{_fmt(x)},{_fmt(y)}")
        if coords:
            parts.append(
                f'<polyline class="series" data-name="{_escape(name)}" '
                f'points="{" ".join(coords)}" fill="none" '
                f'stroke="{color}" stroke-width="1.4"/>'
            )
        parts.append(
            f'<text class="legend" x="{_CHART_W - _CHART_MR - 6}" '
            f'y="{_CHART_MT + 16 * k}" text-anchor="end" font-size="12" '
            f'fill="{color}">{_escape(name)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def scatter_plot(
    xs: Sequence[float],
    ys: Sequence[float],
    classes: Sequence[str] | None = None,
    title: str | None = None,
    x_label: str = "episode",
    y_label: str = "return",
) -> str:
    """Points coloured by class label (consistent colour per class)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size != ys.size or xs.size == 0:
        raise ValueError("xs and ys must be equal-length and non-empty")
    if classes is not None and len(classes) != xs.size:
        raise ValueError("one class per point")

    ylo, yhi = _axis_range(float(ys.min()), float(ys.max()))
    # x axis reuses the index transform by rescaling actual x values
    xlo, xhi = float(xs.min()), float(xs.max())
    span = (xhi - xlo) or 1.0
    n = 1001
    to_xy = _chart_transform(n, ylo, yhi)

    palette: dict[str, str] = {}
    parts = _svg_open(_CHART_W, _CHART_H, title)
    _chart_frame(
        parts, to_xy, n, ylo, yhi, x_label, y_label,
        x_tick=lambda frac: f"{xlo + frac * span:.4g}",
    )
    for i in range(xs.size):
        cls = classes[i] if classes is not None else "points"
        if cls not in palette:
            palette[cls] = SERIES_COLORS[len(palette) % len(SERIES_COLORS)]
        x, y = to_xy((xs[i] - xlo) / span * (n - 1), ys[i])
        parts.append(
            f'<circle class="pt" data-class="{_escape(cls)}" '
            f'cx="{_fmt(x)}" cy="{_fmt(y)}" r="2.2" fill="{palette[cls]}" '
            f'opacity="0.7"/>'
        )
    for k, (cls, color) in enumerate(palette.items()):
        parts.append(
            f'<text class="legend" x="{_CHART_W - _CHART_MR - 6}" '
            f'y="{_CHART_MT + 16 * k}" text-anchor="end" font-size="12" '
            f'fill="{color}">{_escape(cls)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
