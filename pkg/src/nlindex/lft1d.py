"""Discrete Legendre-Fenchel transform in 1D, biconjugate and lower hull.

Used to compare two discrete routes to the convex envelope of a sampled
function: the double transform over a slope grid and the lower convex
hull of the samples.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_SLOPES = 4001
SLOPE_MARGIN = 1.2


@dataclass(frozen=True)
class Sampled1DFunction:
    xs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, float)
        v = np.asarray(self.values, float)
        if xs.ndim != 1 or xs.size == 0:
            raise ValueError("sampled function needs at least one abscissa")
        if xs.shape != v.shape:
            raise ValueError("xs and values must have the same length")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("xs must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.xs.size


def demo_phi(x):
    """Non-convex test function with several wells on [0, 1]."""
    x = np.asarray(x, float)
    return (np.sin(5 * np.pi * x) * np.cos(5 * np.pi * x)
            + np.sin(3 * np.pi * x) * np.cos(3 * np.pi * x) + 0.1 * (x - 0.5) ** 2)


def demo_dphi(x):
    x = np.asarray(x, float)
    return 5 * np.pi * np.cos(10 * np.pi * x) + 3 * np.pi * np.cos(6 * np.pi * x) + 0.2 * (x - 0.5)


def sample(fn, n: int, lo: float = 0.0, hi: float = 1.0) -> Sampled1DFunction:
    xs = np.linspace(lo, hi, n)
    return Sampled1DFunction(xs, fn(xs))


def slope_grid(f: Sampled1DFunction, n: int = N_SLOPES, margin: float = SLOPE_MARGIN) -> np.ndarray:
    """Uniform slopes on ``[-S, S]`` with ``S = margin * max adjacent slope``."""
    if len(f) < 2:
        return np.linspace(-1.0, 1.0, n)
    s = margin * float(np.max(np.abs(np.diff(f.values) / np.diff(f.xs))))
    s = s if s > 0 else 1.0
    return np.linspace(-s, s, n)


def discrete_lft(f: Sampled1DFunction, slopes) -> Sampled1DFunction:
    """``f*(p) = max_i (p x_i - f_i)`` on the given slopes."""
    p = np.unique(np.asarray(slopes, float))
    if p.size == 0:
        raise ValueError("slope grid is empty")
    vals = np.max(p[:, None] * f.xs[None, :] - f.values[None, :], axis=1)
    return Sampled1DFunction(p, vals)


def biconjugate(f: Sampled1DFunction, slopes=None, x_eval=None) -> Sampled1DFunction:
    """Double transform ``f**(x) = max_j (p_j x - f*(p_j))``.

    ``x_eval`` defaults to the sample abscissae.
    """
    p = slope_grid(f) if slopes is None else slopes
    fstar = discrete_lft(f, p)
    xs = f.xs if x_eval is None else np.asarray(x_eval, float)
    vals = np.max(xs[:, None] * fstar.xs[None, :] - fstar.values[None, :], axis=1)
    return Sampled1DFunction(xs, vals)


def lower_hull_1d(f: Sampled1DFunction) -> Sampled1DFunction:
    """Vertices of the lower convex hull of the samples (monotone chain)."""
    if len(f) < 2:
        raise ValueError("lower hull needs at least 2 points")
    hull: list[int] = []
    x, y = f.xs, f.values
    for i in range(len(x)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            u = (x[b] - x[a]) * (y[i] - y[a])
            v = (y[b] - y[a]) * (x[i] - x[a])
            # collinear within roundoff counts as not convex
            if u - v <= 1e-12 * (abs(u) + abs(v)):
                hull.pop()
            else:
                break
        hull.append(i)
    idx = np.array(hull)
    return Sampled1DFunction(x[idx], y[idx])


def evaluate_hull(hull: Sampled1DFunction, x) -> np.ndarray:
    return np.interp(np.asarray(x, float), hull.xs, hull.values)


def sup_distance(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def envelope_demo(n_samples: int = 50, n_ref: int = 2001, n_ref_slopes: int = N_SLOPES) -> dict:
    """Curves for the envelope comparison on :func:`demo_phi`.

    The reference envelope is a dense double transform. The coarse double
    transform uses the slopes available from the samples themselves, i.e.
    the analytic derivative at each sample, so it sees the same
    information budget as the hull (values plus one slope per sample).
    All curves are returned on the dense grid.
    """
    ref = sample(demo_phi, n_ref)
    x = ref.xs
    ref_env = biconjugate(ref, slope_grid(ref, n_ref_slopes)).values
    coarse = sample(demo_phi, n_samples)
    biconj_n = biconjugate(coarse, demo_dphi(coarse.xs), x_eval=x).values
    hull = evaluate_hull(lower_hull_1d(coarse), x)
    return {
        "x": x,
        "phi": ref.values,
        "biconj_hi": ref_env,
        f"biconj_{n_samples}": biconj_n,
        "hull": hull,
        "sup_biconj": sup_distance(biconj_n, ref_env),
        "sup_hull": sup_distance(hull, ref_env),
    }
