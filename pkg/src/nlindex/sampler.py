"""Multi-start fixed-gradient sampling.

Each group starts from its own design, runs ``t_fix`` ordinary MMA
iterations, then freezes the objective gradient at the current iterate
and keeps stepping with the frozen gradient while the constraint stays
live. Designs are saved every ``save_interval`` iterations, including the
start. An optional reference group runs ordinary MMA from a uniform start.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .fem import Mesh2D, SolverError
from .mma import MmaError, MmaState, mma_step, project_box
from .problems import ConfigError, Problem, ProblemSpec, clip_objective

logger = logging.getLogger(__name__)

START_KINDS = ("orthogonalBlocks", "uniformLevels", "seededRandom", "mixed")
N_ORTHOGONAL_IN_MIXED = 8


@dataclass(frozen=True)
class SamplingConfig:
    num_starts: int = 8
    start_kind: str = "orthogonalBlocks"
    t_fix: int = 5
    max_iter: int = 100
    save_interval: int = 20
    eta_max_initial: float = 0.2
    eta_max_after_fix: float = 0.01
    include_reference_group: bool = True
    freeze_gradient: bool = True
    rng_seed: int = 0
    live_objective: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.num_starts < 1:
            raise ConfigError("sampling.num_starts: must be >= 1")
        if self.start_kind not in START_KINDS:
            raise ConfigError(f"sampling.start_kind: unknown start kind {self.start_kind!r}; expected one of {START_KINDS}")
        if not 0 <= self.t_fix < self.max_iter:
            raise ConfigError("sampling.t_fix: need 0 <= t_fix < max_iter")
        if not 1 <= self.save_interval <= self.max_iter:
            raise ConfigError("sampling.save_interval: need 1 <= save_interval <= max_iter")
        if not 0 < self.eta_max_initial <= 1:
            raise ConfigError("sampling.eta_max_initial: must lie in (0, 1]")
        if not 0 < self.eta_max_after_fix <= self.eta_max_initial:
            raise ConfigError("sampling.eta_max_after_fix: must lie in (0, eta_max_initial]")
        if self.workers < 1:
            raise ConfigError("sampling.workers: must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SamplingConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"sampling: unknown field(s) {sorted(unknown)}")
        return cls(**d)


@dataclass
class Sample:
    group_id: int
    iteration: int
    design: np.ndarray
    raw_J: float
    clipped_J: float
    is_start: bool = False
    reference_group: bool = False


@dataclass
class GroupResult:
    group_id: int
    samples: list[Sample]
    aborted: bool = False
    error: str = ""
    objective_trace: list[float] = field(default_factory=list)
    max_change: list[float] = field(default_factory=list)
    volume_trace: list[float] = field(default_factory=list)
    gradients: list[np.ndarray] | None = None


@dataclass
class SampleSet:
    samples: list[Sample]
    clip_bound: float = np.inf
    aborted_groups: list[int] = field(default_factory=list)
    clamped: int = 0  # densities pulled back into the box on ingest

    def __len__(self):
        return len(self.samples)

    @property
    def designs(self) -> np.ndarray:
        return np.vstack([s.design for s in self.samples])

    @property
    def clipped(self) -> np.ndarray:
        return np.array([s.clipped_J for s in self.samples])

    @property
    def raw(self) -> np.ndarray:
        return np.array([s.raw_J for s in self.samples])

    @property
    def group_ids(self) -> np.ndarray:
        return np.array([s.group_id for s in self.samples], dtype=int)

    @property
    def reference_group_ids(self) -> list[int]:
        return sorted({s.group_id for s in self.samples if s.reference_group})

    def best_per_group(self) -> dict[int, int]:
        """Sample index of the lowest clipped objective in every group."""
        best: dict[int, int] = {}
        for i, s in enumerate(self.samples):
            j = best.get(s.group_id)
            if j is None or s.clipped_J < self.samples[j].clipped_J:
                best[s.group_id] = i
        return best

    def reference_index(self) -> int | None:
        """Index of the reference solution (best sample of the reference group)."""
        best = self.best_per_group()
        refs = [best[g] for g in self.reference_group_ids]
        return refs[0] if refs else None

    def without_reference(self) -> "SampleSet":
        keep = [s for s in self.samples if not s.reference_group]
        return SampleSet(keep, self.clip_bound, list(self.aborted_groups))


def make_starts(config: SamplingConfig, mesh: Mesh2D, rho_min: float = 1e-6) -> list[np.ndarray]:
    """Starting designs for the fixed-gradient groups."""
    n, M = mesh.n_elem, config.num_starts
    if M > n:
        raise ConfigError(f"sampling.num_starts: {M} starts exceed the {n} design variables")

    def blocks(k):
        out = []
        for idx in np.array_split(np.arange(n), k):
            x = np.full(n, rho_min)
            x[idx] = 1.0
            out.append(x)
        return out

    def random(k):
        rng = np.random.default_rng(config.rng_seed)
        return list(rng.uniform(rho_min, 1.0, size=(k, n)))

    kind = config.start_kind
    if kind == "orthogonalBlocks":
        return blocks(M)
    if kind == "uniformLevels":
        levels = [0.5] if M == 1 else np.linspace(0.1, 0.9, M)
        return [np.full(n, float(v)) for v in levels]
    if kind == "seededRandom":
        return random(M)
    k = min(N_ORTHOGONAL_IN_MIXED, M)
    return blocks(k) + (random(M - k) if M > k else [])


def _save_iterations(config: SamplingConfig, include_start: bool = True) -> list[int]:
    its = list(range(0, config.max_iter + 1, config.save_interval))
    return its if include_start else [t for t in its if t > 0]


def _scaled(J, dJ, g, dg):
    """Unit-scale objective and constraint rows before the MMA step.

    Positive row scaling leaves the feasible set and minimizers unchanged but
    keeps the constraint multiplier well below ``c``, so the artificial
    variable does not absorb volume violations.
    """
    s0 = 1.0 / max(float(np.abs(dJ).max()), 1e-300)
    s1 = 1.0 / max(float(np.abs(dg).max()), 1e-300)
    return J * s0 if np.isfinite(J) else 0.0, dJ * s0, g * s1, dg * s1


def run_group(start, problem: Problem, config: SamplingConfig, group_id: int = 0,
              freeze: bool | None = None, reference: bool = False,
              record_gradients: bool = False) -> GroupResult:
    """Run one sampling path.

    Iterations ``1..t_fix`` use live gradients and ``eta_max_initial``; the
    objective gradient at ``rho_{t_fix}`` is then frozen (if ``freeze``)
    and iterations ``t_fix+1..T`` use it with ``eta_max_after_fix``.
    Objective values and the constraint stay live throughout.
    """
    freeze = config.freeze_gradient if freeze is None else freeze
    spec = problem.spec
    rho = project_box(start, spec.rho_min)
    state = MmaState(problem.n, move=config.eta_max_initial, xmin=spec.rho_min)
    save_at = set(_save_iterations(config, include_start=not reference))
    result = GroupResult(group_id, [], gradients=[] if record_gradients else None)
    frozen = None
    cache: dict = {}

    def evaluate(t, x, need_grad):
        hit = cache.get(t)
        if hit is not None and (hit.gradient is not None or not need_grad):
            return hit
        ev = problem.evaluate(x, gradient=need_grad)
        cache.clear()
        cache[t] = ev
        return ev

    def needs_live_gradient(t):
        return not freeze or t <= config.t_fix + 1

    def save(t, x):
        ev = evaluate(t, x, need_grad=t < config.max_iter and needs_live_gradient(t + 1))
        J = float(ev.objective)
        result.samples.append(Sample(group_id, t, x.copy(), J, clip_objective(J, problem.objective),
                                     is_start=(t == 0), reference_group=reference))

    try:
        if 0 in save_at:
            save(0, rho)
        for t in range(1, config.max_iter + 1):
            if needs_live_gradient(t):
                ev = evaluate(t - 1, rho, need_grad=True)
                dJ, J = ev.gradient, ev.objective
                if freeze and t == config.t_fix + 1:
                    frozen = dJ.copy()
                    frozen.setflags(write=False)
                    dJ = frozen
            else:
                dJ = frozen
                J = evaluate(t - 1, rho, need_grad=False).objective if config.live_objective else float("nan")
            state.move = config.eta_max_initial if t <= config.t_fix else config.eta_max_after_fix
            g, dg = problem.constraint(rho)
            new = mma_step(state, rho, *_scaled(J, dJ, g, dg))
            result.objective_trace.append(float(J))
            result.max_change.append(float(np.abs(new - rho).max()))
            if record_gradients:
                result.gradients.append(dJ)
            rho = new
            result.volume_trace.append(problem.volume_fraction(rho))
            if t in save_at:
                save(t, rho)
    except (SolverError, MmaError, FloatingPointError) as exc:
        logger.warning("group %d aborted: %s", group_id, exc)
        result.aborted = True
        result.error = str(exc)
    return result


def run_reference_group(problem: Problem, config: SamplingConfig, group_id: int = -1) -> GroupResult:
    """Ordinary MMA from ``rho = vbar`` with the same move-limit schedule."""
    start = np.full(problem.n, problem.spec.volfrac)
    return run_group(start, problem, config, group_id, freeze=False, reference=True)


_WORKER_PROBLEM: Problem | None = None


def _init_worker(spec_dict):
    global _WORKER_PROBLEM
    _WORKER_PROBLEM = Problem(ProblemSpec.from_dict(spec_dict))


def _run_task(args):
    start, config, gid, reference = args
    if reference:
        return run_reference_group(_WORKER_PROBLEM, config, gid)
    return run_group(start, _WORKER_PROBLEM, config, gid)


def run_sampling(problem: Problem | ProblemSpec, config: SamplingConfig) -> tuple[SampleSet, list[GroupResult]]:
    """All groups of one experiment, merged in group-id order."""
    if isinstance(problem, ProblemSpec):
        problem = Problem(problem)
    starts = make_starts(config, problem.mesh, problem.spec.rho_min)
    tasks = [(s, config, gid, False) for gid, s in enumerate(starts)]
    if config.include_reference_group:
        tasks.append((None, config, len(starts), True))
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(config.workers, initializer=_init_worker,
                                 initargs=(problem.spec.to_dict(),)) as pool:
            groups = list(pool.map(_run_task, tasks))
    else:
        groups = []
        for start, cfg, gid, reference in tasks:
            if reference:
                groups.append(run_reference_group(problem, cfg, gid))
            else:
                groups.append(run_group(start, problem, cfg, gid))
    groups.sort(key=lambda g: g.group_id)
    samples = [s for g in groups for s in g.samples]
    aborted = [g.group_id for g in groups if g.aborted]
    return SampleSet(samples, problem.objective.clip_bound, aborted), groups
