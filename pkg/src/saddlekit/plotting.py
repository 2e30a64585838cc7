"""Static SVG plots of traces (no plotting library needed)."""

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .export import atomic_write

__all__ = ["PlotError", "PlotSpec", "render_svg", "emit_svg", "nice_ticks"]

KINDS = ("trajectory-2d", "series-loglog", "series-linear")
WIDTH, HEIGHT = 640, 480
MARGIN = dict(left=80, right=20, top=40, bottom=60)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class PlotError(ValueError):
    pass


@dataclass(frozen=True)
class PlotSpec:
    """What to draw.

    ``trajectory-2d`` plots ``columns[1]`` against ``columns[0]``; the series
    kinds plot each column against ``x_column`` (``k`` by default). ``saddle``
    is an optional point marked on trajectory plots.
    """

    kind: str
    columns: tuple
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    logx: bool = None
    logy: bool = None
    x_column: str = "k"
    saddle: tuple = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PlotError(f"unknown plot kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "columns", tuple(self.columns))
        if not self.columns:
            raise PlotError("plot needs at least one column")
        if self.kind == "trajectory-2d" and len(self.columns) != 2:
            raise PlotError(f"trajectory-2d needs exactly two columns, got {list(self.columns)}")
        log = self.kind == "series-loglog"
        if self.logx is None:
            object.__setattr__(self, "logx", log)
        if self.logy is None:
            object.__setattr__(self, "logy", log)


def nice_ticks(lo, hi, n=5):
    """Round tick positions covering ``[lo, hi]``."""
    if not hi > lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n, 1)
    mag = 10.0 ** np.floor(np.log10(raw))
    step = mag * min((m for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10)
    start = np.ceil(lo / step - 1e-9) * step
    ticks = np.arange(start, hi + step * 1e-9, step)
    return [0.0 if abs(t) < step * 1e-9 else float(t) for t in ticks]


def _log_ticks(lo, hi):
    a, b = int(np.floor(lo)), int(np.ceil(hi))
    stride = max(1, (b - a) // 6)
    return [float(e) for e in range(a, b + 1, stride) if lo - 1e-9 <= e <= hi + 1e-9] or [float(a)]


def _fmt(v, log):
    if log:
        return f"1e{int(round(v))}"
    return f"{v:.6g}"


def _series(table, spec):
    missing = [c for c in spec.columns + ((spec.x_column,) if spec.kind != "trajectory-2d" else ())
               if c not in table]
    if missing:
        raise PlotError(f"columns not in trace: {missing}; available {sorted(table)}")
    out = []
    if spec.kind == "trajectory-2d":
        pairs = [(spec.columns[0], spec.columns[1])]
    else:
        pairs = [(spec.x_column, c) for c in spec.columns]
    for xc, yc in pairs:
        x = np.asarray(table[xc], float)
        y = np.asarray(table[yc], float)
        keep = np.isfinite(x) & np.isfinite(y)
        if spec.logx:
            keep &= x > 0
        if spec.logy:
            keep &= y > 0
        x, y = x[keep], y[keep]
        if x.size < 2:
            raise PlotError(f"column {yc!r} has {x.size} plottable point(s); need at least 2")
        if spec.logx:
            x = np.log10(x)
        if spec.logy:
            y = np.log10(y)
        out.append((yc, x, y))
    return out


def render_svg(table, spec):
    """SVG markup for ``table`` (a mapping from column name to values)."""
    series = _series(table, spec)
    xs = np.concatenate([s[1] for s in series])
    ys = np.concatenate([s[2] for s in series])
    saddle = None
    if spec.kind == "trajectory-2d" and spec.saddle is not None:
        saddle = np.array(spec.saddle, float)
        xs, ys = np.append(xs, saddle[0]), np.append(ys, saddle[1])
    x_lo, x_hi = xs.min(), xs.max()
    y_lo, y_hi = ys.min(), ys.max()
    pad_x = 0.05 * (x_hi - x_lo) or 0.5
    pad_y = 0.05 * (y_hi - y_lo) or 0.5
    x_lo, x_hi, y_lo, y_hi = x_lo - pad_x, x_hi + pad_x, y_lo - pad_y, y_hi + pad_y
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return MARGIN["top"] + (y_hi - v) / (y_hi - y_lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect class="axes" x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black"/>',
    ]
    xt = _log_ticks(x_lo, x_hi) if spec.logx else nice_ticks(x_lo, x_hi)
    yt = _log_ticks(y_lo, y_hi) if spec.logy else nice_ticks(y_lo, y_hi)
    base = MARGIN["top"] + ph
    for t in xt:
        if x_lo <= t <= x_hi:
            x = px(t)
            parts.append(f'<line class="tick" x1="{x:.2f}" y1="{base}" x2="{x:.2f}" y2="{base + 5}" stroke="black"/>')
            parts.append(f'<text x="{x:.2f}" y="{base + 18}" text-anchor="middle">{_fmt(t, spec.logx)}</text>')
    for t in yt:
        if y_lo <= t <= y_hi:
            y = py(t)
            left = MARGIN["left"]
            parts.append(f'<line class="tick" x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
            parts.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{_fmt(t, spec.logy)}</text>')
    for i, (name, x, y) in enumerate(series):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        color = COLORS[i % len(COLORS)]
        parts.append(f'<polyline data-column="{escape(name)}" points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        if spec.kind == "trajectory-2d":
            parts.append(f'<circle class="start" cx="{px(x[0]):.2f}" cy="{py(y[0]):.2f}" r="5" '
                         f'fill="{color}"/>')
            parts.append(f'<text x="{px(x[0]) + 8:.2f}" y="{py(y[0]) - 8:.2f}">start</text>')
    if saddle is not None:
        sx, sy = px(saddle[0]), py(saddle[1])
        parts.append(f'<path class="saddle" d="M{sx - 6:.2f},{sy - 6:.2f} L{sx + 6:.2f},{sy + 6:.2f} '
                     f'M{sx - 6:.2f},{sy + 6:.2f} L{sx + 6:.2f},{sy - 6:.2f}" stroke="black" stroke-width="2"/>')
        parts.append(f'<text x="{sx + 8:.2f}" y="{sy + 16:.2f}">saddle</text>')
    if len(series) > 1:
        for i, (name, _, _) in enumerate(series):
            y = MARGIN["top"] + 16 + 16 * i
            x = MARGIN["left"] + pw - 150
            parts.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 20}" y2="{y - 4}" '
                         f'stroke="{COLORS[i % len(COLORS)]}" stroke-width="2"/>')
            parts.append(f'<text x="{x + 26}" y="{y}">{escape(name)}</text>')
    xlabel = spec.xlabel or (spec.columns[0] if spec.kind == "trajectory-2d" else spec.x_column)
    ylabel = spec.ylabel or (spec.columns[1] if spec.kind == "trajectory-2d" else ", ".join(spec.columns))
    parts.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">'
                 f'{escape(xlabel)}</text>')
    parts.append(f'<text transform="translate(18,{MARGIN["top"] + ph / 2:.1f}) rotate(-90)" '
                 f'text-anchor="middle">{escape(ylabel)}</text>')
    if spec.title:
        parts.append(f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="15">'
                     f'{escape(spec.title)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_svg(table, spec, path):
    """Render and write atomically; returns the path."""
    return atomic_write(path, render_svg(table, spec))
