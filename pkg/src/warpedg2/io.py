"""CSV, JSON and SVG writers. Numbers in CSV use 17 significant digits."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Iterable, List, Sequence

import numpy as np

from .flow import FlowResult
from .geometry import WarpedProfile, compute_abc, torsion_components

__all__ = [
    "fmt",
    "csv_text",
    "json_text",
    "json_line",
    "torsion_rows",
    "flow_rows",
    "phase_rows",
    "phase_svg",
    "TORSION_COLUMNS",
    "FLOW_COLUMNS",
    "PHASE_COLUMNS",
]

TORSION_COLUMNS = ["r", "G", "h", "theta", "alpha", "beta", "gamma", "tau1", "tau7_coeff", "tau27_scale", "traceT"]
FLOW_COLUMNS = ["t", "r", "G", "h", "theta", "alpha", "beta", "gamma", "tau1", "traceT"]
PHASE_COLUMNS = ["r", "alpha", "l", "theta", "R2"]


def fmt(x) -> str:
    return "%.17g" % float(x)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def json_line(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


def torsion_rows(p: WarpedProfile) -> List[list]:
    t = compute_abc(p)
    c = torsion_components(t)
    cols = [p.r, p.G, p.h, p.theta, t.alpha, t.beta, t.gamma, c.tau1, c.tau7_coeff, c.tau27_scale, c.trace_T]
    return [list(vals) for vals in zip(*cols)]


def flow_rows(result: FlowResult) -> List[list]:
    rows = []
    for s in result.states:
        p = s.profile
        t = compute_abc(p)
        c = torsion_components(t)
        tt = np.full(p.grid.n, s.t)
        cols = [tt, p.r, p.G, p.h, p.theta, t.alpha, t.beta, t.gamma, c.tau1, c.trace_T]
        rows.extend(list(vals) for vals in zip(*cols))
    return rows


def phase_rows(r, alpha, l, theta, C: float) -> List[list]:
    r, alpha, l, theta = (np.asarray(x, dtype=float) for x in (r, alpha, l, theta))
    R2 = l * l + (alpha - 2 * C) ** 2
    return [list(v) for v in zip(r, alpha, l, theta, R2)]


def phase_svg(curves: Sequence[tuple], title: str = "", size: int = 480, pad: int = 48) -> str:
    """Static SVG of ``(alpha, l)`` curves with axes.

    ``curves`` holds ``(label, alpha, l)`` tuples. Start points are marked.
    """
    xs = np.concatenate([np.asarray(c[1], dtype=float) for c in curves] + [np.zeros(1)])
    ys = np.concatenate([np.asarray(c[2], dtype=float) for c in curves] + [np.zeros(1)])
    xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 1, x1 + 1
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 1, y1 + 1
    span = size - 2 * pad

    def px(x):
        return pad + (x - x0) / (x1 - x0) * span

    def py(y):
        return size - pad - (y - y0) / (y1 - y0) * span

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<line x1="{pad}" y1="{py(0):.3f}" x2="{size - pad}" y2="{py(0):.3f}" stroke="gray"/>',
        f'<line x1="{px(0):.3f}" y1="{pad}" x2="{px(0):.3f}" y2="{size - pad}" stroke="gray"/>',
        f'<text x="{size - pad}" y="{py(0) - 6:.3f}" font-size="12" text-anchor="end">alpha</text>',
        f'<text x="{px(0) + 6:.3f}" y="{pad - 6}" font-size="12">l</text>',
        f'<text x="{pad}" y="{size - pad / 3:.3f}" font-size="10">alpha in [{x0:.4g}, {x1:.4g}], l in [{y0:.4g}, {y1:.4g}]</text>',
    ]
    if title:
        out.append(f'<text x="{size / 2}" y="{pad / 2}" font-size="14" text-anchor="middle">{title}</text>')
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    for i, (label, a, l) in enumerate(curves):
        a, l = np.asarray(a, dtype=float), np.asarray(l, dtype=float)
        ok = np.isfinite(a) & np.isfinite(l)
        pts = " ".join(f"{px(x):.3f},{py(y):.3f}" for x, y in zip(a[ok], l[ok]))
        color = palette[i % len(palette)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"><title>{label}</title></polyline>')
        if ok.any():
            out.append(f'<circle cx="{px(a[ok][0]):.3f}" cy="{py(l[ok][0]):.3f}" r="3" fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
