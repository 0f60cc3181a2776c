"""Method of Moving Asymptotes for one objective and one inequality constraint.

Asymptote updates and the convex approximations follow Svanberg's
``mmasub`` (asyinit 0.5, asyincr 1.2, asydecr 0.7, albefa 0.1,
raa0 1e-5) with the usual TO constants ``a0 = 1, a = 0, c = 1000, d = 1``.
With a single constraint the subproblem dual is a concave function of one
multiplier, so it is maximised by bracketing and bisection instead of the
primal-dual interior-point ``subsolv``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ASY_INIT = 0.5
ASY_INCR = 1.2
ASY_DECR = 0.7
ALBEFA = 0.1
RAA0 = 1e-5
KKT_TOL = 1e-9


class MmaError(RuntimeError):
    """The MMA subproblem could not be solved."""


@dataclass
class MmaState:
    """Per-path optimizer memory.

    ``low``/``upp`` are the moving asymptotes, ``xold1``/``xold2`` the two
    previous iterates, ``move`` the absolute move limit and ``it`` the
    number of completed steps.
    """

    n: int
    move: float = 0.2
    xmin: float = 1e-6
    xmax: float = 1.0
    c: float = 1000.0
    d: float = 1.0
    a0: float = 1.0
    it: int = 0
    low: np.ndarray | None = None
    upp: np.ndarray | None = None
    xold1: np.ndarray | None = None
    xold2: np.ndarray | None = None
    last: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.move <= 1:
            raise ValueError(f"move limit must lie in (0, 1], got {self.move}")


def project_box(x, rho_min: float, upper: float = 1.0) -> np.ndarray:
    """Component-wise projection onto ``[rho_min, upper]^n``."""
    return np.minimum(np.maximum(np.asarray(x, float), rho_min), upper)


def _update_asymptotes(state: MmaState, x):
    span = state.xmax - state.xmin
    if state.it < 2:
        low = x - ASY_INIT * span
        upp = x + ASY_INIT * span
    else:
        zzz = (x - state.xold1) * (state.xold1 - state.xold2)
        factor = np.ones_like(x)
        factor[zzz > 0] = ASY_INCR
        factor[zzz < 0] = ASY_DECR
        low = x - factor * (state.xold1 - state.low)
        upp = x + factor * (state.upp - state.xold1)
        low = np.clip(low, x - 10 * span, x - 0.01 * span)
        upp = np.clip(upp, x + 0.01 * span, x + 10 * span)
    return low, upp


def approximations(state: MmaState, x, dJ, dg, g):
    """Build the separable convex MMA subproblem around ``x``.

    Returns the asymptotes, move bounds ``alpha``/``beta``, the objective
    and constraint numerators ``p0, q0, p1, q1`` and the constraint offset
    ``b`` so that the approximate constraint reads
    ``sum(p1/(upp - y) + q1/(y - low)) - b <= 0``.
    """
    low, upp = _update_asymptotes(state, x)
    alpha = np.maximum.reduce([low + ALBEFA * (x - low), x - state.move, np.full_like(x, state.xmin)])
    beta = np.minimum.reduce([upp - ALBEFA * (upp - x), x + state.move, np.full_like(x, state.xmax)])
    xmami = max(state.xmax - state.xmin, 1e-5)
    ux1, xl1 = upp - x, x - low
    ux2, xl2 = ux1**2, xl1**2

    def pq(grad):
        p = np.maximum(grad, 0.0)
        q = np.maximum(-grad, 0.0)
        reg = 0.001 * (p + q) + RAA0 / xmami
        return (p + reg) * ux2, (q + reg) * xl2

    p0, q0 = pq(np.asarray(dJ, float))
    p1, q1 = pq(np.asarray(dg, float))
    b = np.sum(p1 / ux1 + q1 / xl1) - g
    return low, upp, alpha, beta, p0, q0, p1, q1, b


def _primal(lam, low, upp, alpha, beta, p0, q0, p1, q1):
    P = p0 + lam * p1
    Q = q0 + lam * q1
    sp_, sq = np.sqrt(P), np.sqrt(Q)
    x = (sp_ * low + sq * upp) / (sp_ + sq)
    return np.clip(x, alpha, beta)


def solve_subproblem(low, upp, alpha, beta, p0, q0, p1, q1, b, c=1000.0, d=1.0, max_iter=200):
    """Maximise the one-multiplier dual of the MMA subproblem.

    Returns ``(x, y, lam, kkt_residual)``; ``y`` is the elastic variable of
    the inequality (nonzero only if the approximate constraint cannot be
    met inside the move bounds).
    """
    def slope(lam):
        x = _primal(lam, low, upp, alpha, beta, p0, q0, p1, q1)
        y = max(0.0, (lam - c) / d)
        return float(np.sum(p1 / (upp - x) + q1 / (x - low)) - b - y), x, y

    h0, x0, y0 = slope(0.0)
    if h0 <= 0.0:
        return x0, y0, 0.0, 0.0
    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        h, _, _ = slope(hi)
        if h < 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise MmaError(f"could not bracket the dual multiplier (slope {h:.3e} at {hi:.3e})")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        h, x, y = slope(mid)
        if abs(h) <= KKT_TOL or hi - lo <= 1e-15 * max(1.0, hi):
            return x, y, mid, abs(h)
        if h > 0:
            lo = mid
        else:
            hi = mid
    raise MmaError(f"dual bisection did not converge: residual {abs(h):.3e}, bracket [{lo:.6e}, {hi:.6e}]")


def mma_step(state: MmaState, x, J, dJ, g, dg) -> np.ndarray:
    """One MMA update; mutates ``state`` and returns the new design.

    ``J`` enters the subproblem only as a constant and is recorded for
    diagnostics. The result stays inside the move limit and the box.
    """
    x = np.asarray(x, float)
    if x.shape != (state.n,):
        raise ValueError(f"design must have length {state.n}")
    dJ = np.asarray(dJ, float)
    dg = np.asarray(dg, float)
    if dJ.shape != x.shape or dg.shape != x.shape:
        raise ValueError("gradient lengths must match the design")
    low, upp, alpha, beta, p0, q0, p1, q1, b = approximations(state, x, dJ, dg, g)
    xnew, y, lam, res = solve_subproblem(low, upp, alpha, beta, p0, q0, p1, q1, b, state.c, state.d)
    xnew = np.clip(xnew, alpha, beta)
    state.xold2 = state.xold1 if state.xold1 is not None else x.copy()
    state.xold1 = x.copy()
    state.low, state.upp = low, upp
    state.it += 1
    state.last = {"J": float(J), "g": float(g), "lam": lam, "y": y, "kkt": res}
    return project_box(xnew, state.xmin, state.xmax)
