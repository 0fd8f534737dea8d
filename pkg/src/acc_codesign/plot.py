"""Minimal SVG rendering of a co-simulation trace.

Two stacked panels: host/lead/set speed on top, relative distance with the
headway requirement boundary below.  Output is plain text and deterministic.
"""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .acc import ControllerParams, headway_threshold

WIDTH = 720
PANEL_H = 240
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 20, 30, 40
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#7f7f7f")


def _nice_max(v: float) -> float:
    if v <= 0:
        return 1.0
    mag = 10 ** np.floor(np.log10(v))
    for m in (1, 2, 2.5, 5, 10):
        if m * mag >= v:
            return float(m * mag)
    return float(10 * mag)


def _polyline(xs, ys, x0, y0, w, h, xmax, ymax, color, dash=None):
    px = x0 + xs / xmax * w
    py = y0 + h - np.clip(ys, 0, ymax) / ymax * h
    pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in zip(px, py))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.2"{extra} points="{pts}"/>'


def _panel(title, ylabel, series, top, t, tmax):
    x0, y0 = MARGIN_L, top + MARGIN_T
    w = WIDTH - MARGIN_L - MARGIN_R
    h = PANEL_H - MARGIN_T - MARGIN_B
    ymax = _nice_max(max(float(np.max(s)) for _, s, _, _ in series))
    out = [f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#000"/>',
           f'<text x="{x0}" y="{y0 - 8}" font-size="13">{escape(title)}</text>',
           f'<text x="12" y="{y0 + h / 2:.1f}" font-size="11" '
           f'transform="rotate(-90 12 {y0 + h / 2:.1f})">{escape(ylabel)}</text>']
    for k in range(5):
        yv = ymax * k / 4
        yy = y0 + h - h * k / 4
        out.append(f'<text x="{x0 - 6}" y="{yy + 4:.1f}" font-size="10" text-anchor="end">{yv:g}</text>')
    for k in range(7):
        tv = tmax * k / 6
        xx = x0 + w * k / 6
        out.append(f'<text x="{xx:.1f}" y="{y0 + h + 14}" font-size="10" '
                   f'text-anchor="middle">{tv:g}</text>')
    for n, (label, ys, color, dash) in enumerate(series):
        out.append(_polyline(t, ys, x0, y0, w, h, tmax, ymax, color, dash))
        lx = x0 + w - 150
        ly = y0 + 14 + 14 * n
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}"'
                   + (f' stroke-dasharray="{dash}"' if dash else "") + "/>")
        out.append(f'<text x="{lx + 26}" y="{ly}" font-size="10">{escape(label)}</text>')
    out.append(f'<text x="{x0 + w / 2:.1f}" y="{y0 + h + 30}" font-size="11" '
               f'text-anchor="middle">time [s]</text>')
    return out


def trace_svg(trace, params: ControllerParams = ControllerParams(), title: str = "",
              max_points: int = 1200) -> str:
    n = len(trace.t)
    stride = max(1, -(-n // max_points))
    sl = slice(None, None, stride)
    t = np.asarray(trace.t)[sl]
    tmax = float(trace.t[-1]) if n else 1.0
    tmax = tmax or 1.0
    kmh = 3.6
    speed = [
        ("host", np.asarray(trace.host_speed)[sl] * kmh, COLORS[0], None),
        ("lead", np.asarray(trace.lead_speed)[sl] * kmh, COLORS[1], None),
        ("set", np.asarray(trace.set_speed)[sl] * kmh, COLORS[3], "4,3"),
    ]
    dist = [
        ("relative distance", np.asarray(trace.rel_dist)[sl], COLORS[2], None),
        ("0.9 h v_host", headway_threshold(np.asarray(trace.host_speed)[sl], params),
         COLORS[1], "4,3"),
    ]
    height = 2 * PANEL_H
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
             f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">',
             f'<rect width="{WIDTH}" height="{height}" fill="#fff"/>']
    if n:
        parts += _panel(f"{title} speed".strip(), "km/h", speed, 0, t, tmax)
        parts += _panel("relative distance", "m", dist, PANEL_H, t, tmax)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
