"""Density-based TO benchmarks: SIMP interpolation, density filter, objectives.

Every objective is evaluated on the filtered field for the physics, and
its gradient is returned with respect to the unfiltered design variables.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.sparse as sp

from .fem import (Assembler, Mesh2D, ParameterError, centroid_strain_matrix, element_conductivity,
                  element_stiffness_elastic, elasticity_matrix)

logger = logging.getLogger(__name__)

OBJECTIVE_KINDS = ("compliance", "pNormStress", "thermalCompliance", "pNormMaxTemp", "tempVariance")
ELASTIC_KINDS = ("compliance", "pNormStress")
THERMAL_KINDS = ("thermalCompliance", "pNormMaxTemp", "tempVariance")

# outlier clipping bounds per objective
CLIP_BOUNDS = {
    "compliance": 1e4,
    "pNormStress": 5e1,
    "thermalCompliance": 1e6,
    "pNormMaxTemp": 1e4,
    "tempVariance": 1e6,
    "fluidDissipation": 1e2,  # no flow solver here; kept for completeness
}

PRESETS = ("fig1-cantilever-2d", "fig12-heatsink")


class ConfigError(ValueError):
    """Invalid problem or sampling configuration; names the offending field."""


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str = "compliance"
    p_agg: float = 10.0
    weights: float = 1.0
    clip_bound: float | None = None
    simp_penal: float = 3.0
    stress_relax: float = 0.5

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ConfigError(f"objective.kind: unknown objective {self.kind!r}; expected one of {OBJECTIVE_KINDS}")
        if self.kind in ("pNormStress", "pNormMaxTemp") and not self.p_agg > 1:
            raise ConfigError(f"objective.p_agg: aggregation exponent must be > 1, got {self.p_agg}")
        if not self.weights > 0:
            raise ConfigError("objective.weights: must be positive")
        if self.clip_bound is None:
            object.__setattr__(self, "clip_bound", CLIP_BOUNDS[self.kind])
        if not self.clip_bound > 0:
            raise ConfigError("objective.clip_bound: must be positive")

    @property
    def physics(self) -> str:
        return "elastic" if self.kind in ELASTIC_KINDS else "thermal"


@dataclass(frozen=True)
class ProblemSpec:
    """Full description of one benchmark.

    ``fig1-cantilever-2d``: left edge clamped, unit downward load spread over
    the two lowest element edges of the right boundary.
    ``fig12-heatsink``: L x L square, nodal heat source ``heat_source``,
    a centred ``sink_cells``-wide Dirichlet (T = 0) segment on the top edge,
    all other boundaries adiabatic.
    """

    preset: str = "fig1-cantilever-2d"
    nelx: int = 60
    nely: int = 30
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    volfrac: float = 0.5
    filter_radius: float = 2.5
    rho_min: float = 1e-6
    E0: float = 1.0
    Emin: float = 1e-9
    nu: float = 0.3
    k0: float = 1.0
    kmin: float = 1e-3
    heat_source: float = -0.01
    sink_cells: int = 20
    load_cells: int = 2

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"problem.preset: unknown boundary-condition preset {self.preset!r}; "
                              f"expected one of {PRESETS}")
        physics = "elastic" if self.preset == "fig1-cantilever-2d" else "thermal"
        if self.objective.physics != physics:
            raise ConfigError(f"objective.kind: {self.objective.kind!r} is not defined on preset {self.preset!r}")
        if self.nelx < 1 or self.nely < 1:
            raise ConfigError("problem.nelx/nely: must be >= 1")
        if not 0 < self.volfrac <= 1:
            raise ConfigError(f"problem.volfrac: must lie in (0, 1], got {self.volfrac}")
        if not 0 < self.rho_min < 1:
            raise ConfigError("problem.rho_min: must lie in (0, 1)")
        if self.filter_radius < 0 or self.filter_radius >= min(self.nelx, self.nely):
            raise ConfigError(f"problem.filter_radius: must lie in [0, min(nelx, nely)), got {self.filter_radius}")
        if physics == "thermal" and not 0 < self.sink_cells <= self.nelx:
            raise ConfigError("problem.sink_cells: must lie in (0, nelx]")
        if physics == "elastic" and not 0 < self.load_cells <= self.nely:
            raise ConfigError("problem.load_cells: must lie in (0, nely]")

    @property
    def physics(self) -> str:
        return self.objective.physics

    @property
    def n_elem(self) -> int:
        return self.nelx * self.nely

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        d = dict(d)
        obj = d.pop("objective", {})
        if not isinstance(obj, ObjectiveSpec):
            unknown = set(obj) - set(ObjectiveSpec.__dataclass_fields__)
            if unknown:
                raise ConfigError(f"objective: unknown field(s) {sorted(unknown)}")
            obj = ObjectiveSpec(**obj)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"problem: unknown field(s) {sorted(unknown)}")
        return cls(objective=obj, **d)


@dataclass
class EvalResult:
    objective: float
    gradient: np.ndarray | None
    volume_frac: float
    state: np.ndarray


class DensityFilter:
    """Cone-weighted density filter ``rho_f = H rho / Hs``.

    Weights ``max(0, r - dist)`` use element-centre distances measured in
    element units; ``H`` is symmetric and assembled once per mesh.
    """

    def __init__(self, mesh: Mesh2D, radius: float):
        self.radius = float(radius)
        nelx, nely = mesh.nelx, mesh.nely
        reach = int(np.ceil(self.radius)) - 1
        rows, cols, vals = [], [], []
        ix, iy = np.divmod(np.arange(mesh.n_elem), nely)
        for dx in range(-reach, reach + 1):
            for dy in range(-reach, reach + 1):
                w = self.radius - np.hypot(dx, dy)
                if w <= 0:
                    continue
                jx, jy = ix + dx, iy + dy
                ok = (jx >= 0) & (jx < nelx) & (jy >= 0) & (jy < nely)
                rows.append(np.flatnonzero(ok))
                cols.append(jy[ok] + jx[ok] * nely)
                vals.append(np.full(ok.sum(), w))
        n = mesh.n_elem
        if rows:
            H = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
            self.H = H.tocsr()
        else:
            self.H = sp.identity(n, format="csr")
        self.Hs = np.asarray(self.H.sum(axis=1)).ravel()

    def __call__(self, rho):
        return self.H @ np.asarray(rho, float) / self.Hs

    def backprop(self, grad_filtered):
        """Chain rule: gradient w.r.t. the unfiltered field."""
        return self.H.T @ (np.asarray(grad_filtered, float) / self.Hs)


def density_filter(mesh: Mesh2D, rho, radius: float) -> np.ndarray:
    return DensityFilter(mesh, radius)(rho)


def clip_objective_value(J: float, bound: float) -> float:
    return min(float(J), float(bound))


def clip_objective(J: float, spec: ObjectiveSpec) -> float:
    return clip_objective_value(J, spec.clip_bound)


def pnorm(values, p: float, weights=1.0):
    """Weighted p-norm of nonnegative values, scaled by the max to avoid overflow.

    Returns ``(J, dJ/dvalues)``.
    """
    x = np.asarray(values, float)
    w = np.broadcast_to(np.asarray(weights, float), x.shape)
    m = x.max()
    if m <= 0:
        return 0.0, np.zeros_like(x)
    s = np.sum(w * (x / m) ** p)
    J = m * s ** (1.0 / p)
    dJ = w * (x / J) ** (p - 1)
    return float(J), dJ


class Problem:
    """Compiled benchmark: mesh, loads, assembler, filter and objective."""

    def __init__(self, spec: ProblemSpec, backend: str | None = None):
        self.spec = spec
        self.mesh = Mesh2D(spec.nelx, spec.nely)
        self.filter = DensityFilter(self.mesh, spec.filter_radius)
        self.objective = spec.objective
        self.penal = spec.objective.simp_penal
        mesh = self.mesh
        if spec.physics == "elastic":
            self.ke = element_stiffness_elastic(1.0, spec.nu)
            self.edofs = mesh.elem_dofs()
            n_dof = 2 * mesh.n_node
            fixed = np.concatenate([2 * mesh.node_ids[0, :], 2 * mesh.node_ids[0, :] + 1])
            load = np.zeros(n_dof)
            # uniform traction on the lowest load_cells edges of the right boundary
            nodes = mesh.node_ids[-1, mesh.nely - spec.load_cells:]
            w = np.ones(nodes.size)
            w[[0, -1]] = 0.5
            load[2 * nodes + 1] = -w / w.sum()
            self.load = load
            self.vmin, self.v0 = spec.Emin, spec.E0
            D = elasticity_matrix(1.0, spec.nu)
            B = centroid_strain_matrix(mesh.elem_size)
            self.stress_map = D @ B  # solid stress per unit E0 at the centroid
            V = np.array([[1.0, -0.5, 0.0], [-0.5, 1.0, 0.0], [0.0, 0.0, 3.0]])
            self.vm_matrix = self.stress_map.T @ V @ self.stress_map * spec.E0**2
        else:
            self.ke = element_conductivity(1.0)
            self.edofs = mesh.elem_nodes
            n_dof = mesh.n_node
            first = (spec.nelx - spec.sink_cells) // 2
            fixed = mesh.node_ids[first:first + spec.sink_cells + 1, 0]
            self.load = np.full(n_dof, spec.heat_source)
            self.vmin, self.v0 = spec.kmin, spec.k0
        self.fixed = fixed
        self.assembler = Assembler(self.ke, self.edofs, n_dof, fixed, backend=backend)
        self.base_ke = self.ke

    @property
    def n(self) -> int:
        return self.mesh.n_elem

    def volume_fraction(self, rho) -> float:
        return float(np.mean(rho))

    def constraint(self, rho):
        """Volume constraint ``g = mean(rho) - vbar <= 0`` and its gradient."""
        g = self.volume_fraction(rho) - self.spec.volfrac
        return g, np.full(self.n, 1.0 / self.n)

    def material(self, rho_f):
        return self.vmin + rho_f**self.penal * (self.v0 - self.vmin)

    def dmaterial(self, rho_f):
        return self.penal * rho_f ** (self.penal - 1) * (self.v0 - self.vmin)

    def solve_state(self, rho_f):
        return self.assembler.solve(self.material(rho_f), self.load)

    def evaluate(self, rho, gradient: bool = True) -> EvalResult:
        rho = np.asarray(rho, float)
        if rho.shape != (self.n,):
            raise ValueError(f"design must have length {self.n}")
        rho_f = self.filter(rho)
        kind = self.objective.kind
        if kind == "compliance":
            J, dJf, state = self._compliance(rho_f, gradient)
        elif kind == "pNormStress":
            J, dJf, state = self._pnorm_stress(rho_f, gradient)
        else:
            J, dJf, state = self._thermal(rho_f, gradient)
        dJ = self.filter.backprop(dJf) if gradient else None
        return EvalResult(objective=J, gradient=dJ, volume_frac=self.volume_fraction(rho), state=state)

    def _energy_density(self, a, b):
        """Per-element ``a_e^T k0 b_e``."""
        ae, be = a[self.edofs], b[self.edofs]
        return np.einsum("ei,ij,ej->e", ae, self.base_ke, be)

    def _compliance(self, rho_f, gradient):
        u = self.solve_state(rho_f)
        J = float(self.load @ u)
        dJf = -self.dmaterial(rho_f) * self._energy_density(u, u) if gradient else None
        return J, dJf, u

    def element_stresses(self, u, rho_f):
        """Relaxed centroid von Mises stresses and the solid ones."""
        ue = u[self.edofs]
        s2 = np.einsum("ei,ij,ej->e", ue, self.vm_matrix, ue)
        s_solid = np.sqrt(np.maximum(s2, 0.0))
        q = self.objective.stress_relax
        return rho_f**q * s_solid, s_solid

    def _pnorm_stress(self, rho_f, gradient):
        u = self.solve_state(rho_f)
        sigma, s_solid = self.element_stresses(u, rho_f)
        p, q = self.objective.p_agg, self.objective.stress_relax
        J, dJds = pnorm(sigma, p)
        if not gradient:
            return J, None, u
        dJf = dJds * q * rho_f ** (q - 1) * s_solid
        ue = u[self.edofs]
        with np.errstate(invalid="ignore", divide="ignore"):
            coef = np.where(s_solid > 0, dJds * rho_f**q / s_solid, 0.0)
        dsdu = coef[:, None] * (ue @ self.vm_matrix)  # vm_matrix is symmetric
        adj_load = np.zeros_like(u)
        np.add.at(adj_load, self.edofs, dsdu)
        lam = self.assembler.solve(self.material(rho_f), adj_load)
        dJf = dJf - self.dmaterial(rho_f) * self._energy_density(lam, u)
        return J, dJf, u

    def element_temperatures(self, T):
        return T[self.edofs].mean(axis=1)

    def _thermal(self, rho_f, gradient):
        T = self.solve_state(rho_f)
        kind, w = self.objective.kind, self.objective.weights
        if kind == "thermalCompliance":
            J = float(self.load @ T)
            dJf = -self.dmaterial(rho_f) * self._energy_density(T, T) if gradient else None
            return J, dJf, T
        Te = self.element_temperatures(T)
        if kind == "pNormMaxTemp":
            # aggregated on |T_e|: the sink is at 0 and the source is negative
            J, dJdx = pnorm(np.abs(Te), self.objective.p_agg, w)
            dJdTe = dJdx * np.sign(Te)
        else:
            wv = np.full(Te.shape, w)
            Tbar = np.sum(wv * Te) / np.sum(wv)
            dev = Te - Tbar
            J = float(np.sum(wv * dev**2))
            dJdTe = 2.0 * wv * dev - wv / wv.sum() * np.sum(2.0 * wv * dev)
        if not gradient:
            return J, None, T
        adj_load = np.zeros_like(T)
        np.add.at(adj_load, self.edofs, np.repeat(dJdTe[:, None] / 4.0, 4, axis=1))
        lam = self.assembler.solve(self.material(rho_f), adj_load)
        dJf = -self.dmaterial(rho_f) * self._energy_density(lam, T)
        return J, dJf, T


def eval_compliance(rho, problem: Problem) -> EvalResult:
    if problem.objective.kind != "compliance":
        raise ConfigError("problem objective is not compliance")
    return problem.evaluate(rho)


def eval_pnorm_stress(rho, problem: Problem) -> EvalResult:
    if problem.objective.kind != "pNormStress":
        raise ConfigError("problem objective is not pNormStress")
    return problem.evaluate(rho)


def eval_thermal(rho, problem: Problem) -> EvalResult:
    if problem.objective.kind not in THERMAL_KINDS:
        raise ConfigError("problem objective is not thermal")
    return problem.evaluate(rho)
