"""Self-contained SVG views of a landscape surface.

``surface.svg`` shows filled iso-bands of the normalized objective over the
triangulation (warm colours for high values) with sample markers;
``contour.svg`` shows the iso-lines between the bands.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .landscape import LandscapeSurface, LowerHullEnvelope

SIZE = 600
PAD = 0.05
# diverging palette, cool (low) to warm (high)
PALETTE = np.array([
    (49, 54, 149), (69, 117, 180), (116, 173, 209), (171, 217, 233), (224, 243, 248),
    (254, 224, 144), (253, 174, 97), (244, 109, 67), (215, 48, 39), (165, 0, 38),
], float)


@dataclass
class Markers:
    starts: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    bests: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    reference: np.ndarray | None = None


def color(t: float) -> str:
    t = min(max(float(t), 0.0), 1.0) * (len(PALETTE) - 1)
    i = min(int(t), len(PALETTE) - 2)
    c = PALETTE[i] + (t - i) * (PALETTE[i + 1] - PALETTE[i])
    return "#{:02x}{:02x}{:02x}".format(*np.rint(c).astype(int))


class _Frame:
    def __init__(self, pts):
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-300))
        self.lo = lo - PAD * span
        self.scale = SIZE / (span * (1 + 2 * PAD))

    def __call__(self, p):
        p = np.atleast_2d(p)
        x = (p[:, 0] - self.lo[0]) * self.scale
        y = SIZE - (p[:, 1] - self.lo[1]) * self.scale
        return np.column_stack([x, y])


def _clip(poly, vals, level, keep_above):
    """Clip a polygon with linear vertex values to ``val >= level`` (or ``<=``)."""
    out_p, out_v = [], []
    n = len(poly)
    for i in range(n):
        p, v = poly[i], vals[i]
        q, w = poly[(i + 1) % n], vals[(i + 1) % n]
        pin = v >= level if keep_above else v <= level
        qin = w >= level if keep_above else w <= level
        if pin:
            out_p.append(p)
            out_v.append(v)
        if pin != qin:
            t = (level - v) / (w - v)
            out_p.append(p + t * (q - p))
            out_v.append(level)
    return out_p, out_v


def _area(poly):
    x, y = np.array(poly).T
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def iso_bands(surface: LandscapeSurface, bands: int = 10) -> list[list[np.ndarray]]:
    """Polygons of ``k/B <= f <= (k+1)/B`` for each band ``k``."""
    pts, vals = surface.points, surface.values
    scale = float(np.ptp(pts, axis=0).max()) ** 2 or 1.0
    out: list[list[np.ndarray]] = [[] for _ in range(bands)]
    for tri in surface.triangles:
        P = [pts[i] for i in tri]
        V = [float(vals[i]) for i in tri]
        for k in range(bands):
            lo, hi = k / bands, (k + 1) / bands
            if max(V) < lo or min(V) > hi:
                continue
            p, v = _clip(P, V, lo, True)
            if len(p) < 3:
                continue
            p, v = _clip(p, v, hi, False)
            if len(p) >= 3 and _area(p) > 1e-14 * scale:
                out[k].append(np.array(p))
    return out


def iso_lines(surface: LandscapeSurface, bands: int = 10) -> list[list[np.ndarray]]:
    """Segments of ``f = k/B`` for ``k = 1..B-1``."""
    pts, vals = surface.points, surface.values
    out = []
    for k in range(1, bands):
        level = k / bands
        segs = []
        for tri in surface.triangles:
            V = vals[tri]
            above = V > level
            if above.all() or (~above).all():
                continue
            cross = []
            for a, b in ((0, 1), (1, 2), (2, 0)):
                if above[a] != above[b]:
                    t = (level - V[a]) / (V[b] - V[a])
                    cross.append(pts[tri[a]] + t * (pts[tri[b]] - pts[tri[a]]))
            if len(cross) == 2:
                segs.append(np.array(cross))
        out.append(segs)
    return out


def _path(poly):
    return "M" + "L".join(f"{x:.3f},{y:.3f}" for x, y in poly) + "Z"


def _header(title):
    return [f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
            f'viewBox="0 0 {SIZE} {SIZE}">', f"<title>{title}</title>",
            f'<rect width="{SIZE}" height="{SIZE}" fill="#ffffff"/>']


def _markers(frame, markers: Markers | None):
    if markers is None:
        return []
    out = ['<g id="markers">']
    for x, y in frame(markers.starts) if len(markers.starts) else []:
        out.append(f'<rect class="start" x="{x - 4:.3f}" y="{y - 4:.3f}" width="8" height="8" '
                   f'fill="none" stroke="#1f3fbf" stroke-width="1.5"/>')
    for x, y in frame(markers.bests) if len(markers.bests) else []:
        out.append(f'<path class="best" d="M{x - 4:.3f},{y - 4:.3f}L{x + 4:.3f},{y + 4:.3f}'
                   f'M{x - 4:.3f},{y + 4:.3f}L{x + 4:.3f},{y - 4:.3f}" stroke="#d00000" stroke-width="1.5"/>')
    if markers.reference is not None:
        x, y = frame(markers.reference)[0]
        out.append(f'<circle class="reference" cx="{x:.3f}" cy="{y:.3f}" r="5" fill="#e6b800" stroke="#000000"/>')
    out.append("</g>")
    return out


def surface_svg(surface: LandscapeSurface, envelope: LowerHullEnvelope | None = None,
                markers: Markers | None = None, bands: int = 10) -> str:
    frame = _Frame(surface.points)
    title = "normalized objective"
    if envelope is not None and np.isfinite(envelope.index):
        title += f", I_NL = {envelope.index:.4f}"
    lines = _header(title)
    for k, polys in enumerate(iso_bands(surface, bands)):
        if not polys:
            continue
        fill = color((k + 0.5) / bands)
        d = "".join(_path(frame(p)) for p in polys)
        lines.append(f'<g id="band-{k}"><path d="{d}" fill="{fill}" stroke="{fill}" stroke-width="0.3"/></g>')
    lines += _markers(frame, markers)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def contour_svg(surface: LandscapeSurface, markers: Markers | None = None, bands: int = 10) -> str:
    frame = _Frame(surface.points)
    lines = _header("iso-lines of the normalized objective")
    for k, segs in enumerate(iso_lines(surface, bands), start=1):
        if not segs:
            continue
        d = "".join("M{:.3f},{:.3f}L{:.3f},{:.3f}".format(*frame(s).ravel()) for s in segs)
        lines.append(f'<g id="level-{k}"><path d="{d}" fill="none" stroke="{color(k / bands)}" '
                     f'stroke-width="1.2"/></g>')
    lines += _markers(frame, markers)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_surface_svg(surface, envelope, path, markers=None, bands: int = 10) -> None:
    Path(path).write_text(surface_svg(surface, envelope, markers, bands))


def write_contour_svg(surface, path, markers=None, bands: int = 10) -> None:
    Path(path).write_text(contour_svg(surface, markers, bands))
