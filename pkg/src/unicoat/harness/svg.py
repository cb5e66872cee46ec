"""Minimal SVG line charts with error bars; one chart per file, no plotting dependency."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from string import Template
from xml.sax.saxutils import escape

W, H = 640, 420
MARGIN = dict(left=70, right=150, top=40, bottom=55)
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]

_DOC = Template("""<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="$w" height="$h" viewBox="0 0 $w $h" font-family="sans-serif" font-size="12">
<rect width="$w" height="$h" fill="white"/>
<text x="$cx" y="22" text-anchor="middle" font-size="15">$title</text>
$body
<text x="$cx" y="${xl_y}" text-anchor="middle">$xlabel</text>
<text transform="translate(18,$cy) rotate(-90)" text-anchor="middle">$ylabel</text>
</svg>
""")


@dataclass
class Series:
    label: str
    points: list[tuple[float, float, float | None, float | None]] = field(default_factory=list)
    # (x, y, y_low, y_high)


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out, t = [], start
    while t <= hi + 1e-9 * step:
        out.append(round(t, 10))
        t += step
    return out


def _log_ticks(lo: float, hi: float) -> list[float]:
    return [10.0 ** e for e in range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1)]


def _fmt(v: float) -> str:
    return f"{v:g}"


def line_chart(series: list[Series], title: str, xlabel: str, ylabel: str,
               log_x: bool = False, log_y: bool = False) -> str:
    xs = [p[0] for s in series for p in s.points]
    ys = [v for s in series for p in s.points for v in (p[1], p[2], p[3]) if v is not None]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    if log_y:
        ys = [y for y in ys if y > 0] or [1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x0 == x1:
        x0, x1 = x0 - 1, x1 + 1
    if log_y:
        y0, y1 = 10 ** math.floor(math.log10(y0)), 10 ** math.ceil(math.log10(y1))
        if y0 == y1:
            y1 = y0 * 10
    else:
        y0 = min(0.0, y0)
        y1 = y1 * 1.05 if y1 > 0 else 1.0
    fx = (lambda v: math.log(v)) if log_x else (lambda v: v)
    fy = (lambda v: math.log(v)) if log_y else (lambda v: v)
    pw = W - MARGIN["left"] - MARGIN["right"]
    ph = H - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (fx(v) - fx(x0)) / (fx(x1) - fx(x0)) * pw

    def py(v):
        return MARGIN["top"] + ph - (fy(v) - fy(y0)) / (fy(y1) - fy(y0)) * ph

    parts = [f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
             'fill="none" stroke="#333"/>']
    yt = _log_ticks(y0, y1) if log_y else _ticks(y0, y1)
    for t in yt:
        if not y0 <= t <= y1:
            continue
        y = py(t)
        parts.append(f'<line x1="{MARGIN["left"]}" y1="{y:.1f}" x2="{MARGIN["left"] + pw}" '
                     f'y2="{y:.1f}" stroke="#ddd"/>')
        parts.append(f'<text x="{MARGIN["left"] - 6}" y="{y + 4:.1f}" text-anchor="end">{_fmt(t)}</text>')
    xt = sorted(set(xs)) if len(set(xs)) <= 8 else _ticks(x0, x1)
    for t in xt:
        x = px(t)
        parts.append(f'<text x="{x:.1f}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = [p for p in s.points if not log_y or p[1] > 0]
        if len(pts) > 1:
            path = " ".join(f"{px(p[0]):.1f},{py(p[1]):.1f}" for p in pts)
            parts.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y, lo, hi in pts:
            if lo is not None and hi is not None and (not log_y or lo > 0):
                parts.append(f'<line x1="{px(x):.1f}" y1="{py(lo):.1f}" x2="{px(x):.1f}" '
                             f'y2="{py(hi):.1f}" stroke="{color}"/>')
            parts.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="3" fill="{color}"/>')
        ly = MARGIN["top"] + 14 + 18 * i
        lx = MARGIN["left"] + pw + 12
        parts.append(f'<rect x="{lx}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{lx + 15}" y="{ly}">{escape(s.label)}</text>')
    return _DOC.substitute(w=W, h=H, cx=W // 2, cy=MARGIN["top"] + ph // 2, xl_y=H - 15,
                           title=escape(title), xlabel=escape(xlabel), ylabel=escape(ylabel),
                           body="\n".join(parts))


def experiment_charts(result) -> dict[str, str]:
    """rounds vs n, ratio vs n (log scale) and, with several radii, rounds vs radius."""
    cells = [c for c in result.cells if c.mean_rounds is not None]
    radii = sorted({c.radius for c in cells}, key=lambda r: (r is None, r))
    by_n = sorted({c.n for c in cells})

    def per_radius(value, low, high):
        out = []
        for r in radii:
            pts = [(c.n, getattr(c, value), getattr(c, low), getattr(c, high))
                   for c in sorted(cells, key=lambda c: c.n)
                   if c.radius == r and getattr(c, value) is not None]
            out.append(Series("all" if r is None else f"radius {r}", pts))
        return out

    charts = {
        "rounds_vs_n.svg": line_chart(per_radius("mean_rounds", "ci_low", "ci_high"),
                                      "Rounds to quiescence", "particles n", "rounds"),
        "ratio_vs_n.svg": line_chart(per_radius("mean_ratio", "ratio_ci_low", "ratio_ci_high"),
                                     "Rounds / matching dilation", "particles n",
                                     "ratio (lower bound, not OPT)", log_y=True),
    }
    if len([r for r in radii if r is not None]) > 1:
        series = []
        for n in by_n:
            pts = [(c.radius, c.mean_rounds, c.ci_low, c.ci_high)
                   for c in sorted(cells, key=lambda c: c.radius) if c.n == n]
            series.append(Series(f"n = {n}", pts))
        charts["rounds_vs_radius.svg"] = line_chart(series, "Rounds by object radius",
                                                    "hexagon radius", "rounds")
    return charts
