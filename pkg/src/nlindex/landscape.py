"""Visualization surface, lower-convex-hull envelope and the non-linearity index.

The surface is the piecewise-linear Delaunay interpolant of the normalized
objective values over the 2D embedding. Its convex envelope is approximated
by the downward faces of the 3D convex hull of the lifted samples; each such
face is sampled on a barycentric lattice of resolution ``R`` and the index
is the mean vertical gap between surface and envelope over all lattice
points (every face gets the same number of points, no area weighting).
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.sparse import coo_matrix
from scipy.spatial import ConvexHull, Delaunay, QhullError, cKDTree

logger = logging.getLogger(__name__)

DEDUP_TOL = 1e-12
JITTER = 1e-9
NORMAL_TOL = 1e-12


class DegeneracyError(ValueError):
    """Samples do not span a 2D region (collinear embedding)."""


@dataclass
class LandscapeSurface:
    points: np.ndarray  # (m, 2) distinct embedding coordinates
    values: np.ndarray  # (m,) normalized objective in [0, 1]
    tri: Delaunay
    j_min: float
    j_max: float
    sample_to_point: np.ndarray  # (N,) index of each input sample in ``points``
    normalized: np.ndarray  # (N,) normalized value of every input sample
    jitter: float = 0.0
    flat: bool = False

    @property
    def triangles(self) -> np.ndarray:
        return self.tri.simplices

    def __call__(self, y) -> np.ndarray:
        return interpolate(self, y)


@dataclass
class LowerHullEnvelope:
    faces: np.ndarray  # (F, 3) vertex indices into surface.points, counterclockwise seen from below
    resolution: int
    query_points: np.ndarray  # (F * L, 2)
    query_heights: np.ndarray  # envelope height at each query point
    surface_values: np.ndarray = field(default=None)  # f at each query point
    gaps: np.ndarray = field(default=None)
    index: float = float("nan")
    fallback: bool = False

    @property
    def points_per_face(self) -> int:
        return (self.resolution + 1) * (self.resolution + 2) // 2

    def face_gap_means(self) -> np.ndarray:
        return self.gaps.reshape(len(self.faces), self.points_per_face).mean(axis=1)


def normalize(values):
    """Min-max normalization; returns ``(normalized, jmin, jmax)``."""
    v = np.asarray(values, float)
    jmin, jmax = float(v.min()), float(v.max())
    if jmax == jmin:
        warnings.warn("all objective values are equal; the surface is flat", RuntimeWarning, stacklevel=2)
        return np.zeros_like(v), jmin, jmax
    return (v - jmin) / (jmax - jmin), jmin, jmax


def _dedupe(coords, values, tol):
    tree = cKDTree(coords)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    n = len(coords)
    if len(pairs) == 0:
        return coords, values, np.arange(n)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    ncomp, labels = connected_components(graph, directed=False)
    # components numbered by first occurrence so the output order is stable
    first = np.full(ncomp, n)
    np.minimum.at(first, labels, np.arange(n))
    order = np.argsort(first)
    relabel = np.empty(ncomp, dtype=int)
    relabel[order] = np.arange(ncomp)
    lab = relabel[labels]
    pts = coords[np.sort(first)]
    vals = np.full(ncomp, np.inf)
    np.minimum.at(vals, lab, values)
    return pts, vals, lab


def _is_degenerate(coords):
    if len(coords) < 3:
        return True
    c = coords - coords.mean(axis=0)
    s = np.linalg.svd(c, compute_uv=False)
    return s[0] == 0 or s[-1] <= 1e-12 * s[0]


def build_surface(coords, objective_values, jitter: float | None = JITTER, seed: int = 0,
                  dedup_tol: float = DEDUP_TOL) -> LandscapeSurface:
    """Normalize objective values and triangulate the embedding.

    Duplicate coordinates (within ``dedup_tol``) are merged, keeping the
    lowest value. A collinear embedding gets a seeded jitter of magnitude
    ``jitter``; with ``jitter=None`` it raises :class:`DegeneracyError`.
    """
    coords = np.asarray(coords, float)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise ValueError("coords must have shape (N, 2)")
    if len(coords) < 3:
        raise DegeneracyError(f"a surface needs at least 3 samples, got {len(coords)}")
    normalized, jmin, jmax = normalize(objective_values)
    pts, vals, idx = _dedupe(coords, normalized, dedup_tol)
    applied = 0.0
    if _is_degenerate(pts):
        if not jitter:
            raise DegeneracyError("embedding is collinear; rebuild with jitter enabled (e.g. jitter=1e-9)")
        rng = np.random.default_rng(seed)
        scale = max(1.0, float(np.abs(pts).max()))
        pts = pts + rng.uniform(-1.0, 1.0, size=pts.shape) * jitter * scale
        applied = jitter * scale
        logger.warning("collinear embedding: applied deterministic jitter %.1e", applied)
        if len(pts) < 3 or _is_degenerate(pts):
            raise DegeneracyError("embedding has fewer than 3 distinct points; cannot build a surface")
    tri = Delaunay(pts)
    return LandscapeSurface(pts, vals, tri, jmin, jmax, idx, normalized, applied, flat=(jmax == jmin))


def interpolate(surface: LandscapeSurface, y) -> np.ndarray:
    """Piecewise-linear surface value at query points ``y`` (inside the hull)."""
    y = np.atleast_2d(np.asarray(y, float))
    tri = surface.tri
    simplex = tri.find_simplex(y, tol=1e-12)
    bad = np.flatnonzero(simplex < 0)
    if bad.size:
        # boundary points lost to roundoff: take the least-violated simplex
        T = tri.transform
        for i in bad:
            b = np.einsum("sij,sj->si", T[:, :2], y[i] - T[:, 2])
            bary = np.column_stack([b, 1 - b.sum(axis=1)])
            k = int(np.argmax(bary.min(axis=1)))
            if bary[k].min() < -1e-6:
                raise AssertionError(f"query point {y[i]} lies outside the surface triangulation")
            simplex[i] = k
    T = tri.transform[simplex]
    b = np.einsum("qij,qj->qi", T[:, :2], y - T[:, 2])
    bary = np.column_stack([b, 1 - b.sum(axis=1)])
    verts = tri.simplices[simplex]
    return np.sum(bary * surface.values[verts], axis=1)


def barycentric_weights(R: int) -> np.ndarray:
    """Lattice weights ``(c, a, b)`` with ``a = i/R``, ``b = j/R``, ``c = 1 - a - b``."""
    if R < 1:
        raise ValueError("barycentric resolution must be >= 1")
    rows = []
    for i in range(R + 1):
        for j in range(R - i + 1):
            a, b = i / R, j / R
            rows.append((1.0 - a - b, a, b))
    return np.array(rows)


def _lower_faces(lifted):
    hull = ConvexHull(lifted)
    faces = hull.simplices.copy()
    p1, p2, p3 = lifted[faces[:, 0]], lifted[faces[:, 1]], lifted[faces[:, 2]]
    n = np.cross(p2 - p1, p3 - p1)
    # orient every face so its cross-product normal points outward
    flip = np.einsum("ij,ij->i", n, hull.equations[:, :3]) < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    n[flip] = -n[flip]
    norm = np.linalg.norm(n, axis=1)
    keep = n[:, 2] < -NORMAL_TOL * np.maximum(norm, 1e-300)
    return faces[keep]


def _is_planar(lifted):
    c = lifted - lifted.mean(axis=0)
    s = np.linalg.svd(c, compute_uv=False)
    return s[-1] <= 1e-12 * max(s[0], 1e-300)


def lower_convex_hull(surface: LandscapeSurface, R: int = 20) -> LowerHullEnvelope:
    """Downward hull faces of the lifted samples, sampled on a barycentric lattice."""
    W = barycentric_weights(R)
    lifted = np.column_stack([surface.points, surface.values])
    fallback = False
    faces = None
    if len(lifted) >= 4 and not _is_planar(lifted):
        try:
            faces = _lower_faces(lifted)
        except QhullError as exc:
            logger.warning("convex hull failed (%s); using planar fallback", exc)
    if faces is None or len(faces) == 0:
        # coplanar lifted points: the surface is its own envelope
        faces = surface.tri.simplices.copy()
        fallback = True
    V = lifted[faces]  # (F, 3, 3)
    Q = np.einsum("lk,fkd->fld", W, V).reshape(-1, 3)
    env = LowerHullEnvelope(faces, R, Q[:, :2], Q[:, 2], fallback=fallback)
    return env


def nonlinearity_index(surface: LandscapeSurface, envelope: LowerHullEnvelope) -> float:
    """Mean absolute gap between surface and envelope over the query lattice."""
    f = interpolate(surface, envelope.query_points)
    if envelope.fallback:
        f_env = f
    else:
        f_env = envelope.query_heights
    gaps = np.abs(f - f_env)
    envelope.surface_values = f
    envelope.gaps = gaps
    envelope.index = float(np.mean(gaps))
    return envelope.index


def analyze(coords, objective_values, R: int = 20, jitter: float | None = JITTER, seed: int = 0):
    """Surface, envelope and index in one call."""
    surface = build_surface(coords, objective_values, jitter=jitter, seed=seed)
    envelope = lower_convex_hull(surface, R)
    nonlinearity_index(surface, envelope)
    return surface, envelope, envelope.index
