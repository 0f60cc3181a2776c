import numpy as np
import pytest

from nlindex.fem import Mesh2D
from nlindex.problems import ConfigError, ObjectiveSpec, Problem, ProblemSpec
from nlindex.sampler import SamplingConfig, make_starts, run_group, run_reference_group, run_sampling


def cos_sim(a, b):
    return a @ b / np.linalg.norm(a) / np.linalg.norm(b)


def test_two_orthogonal_blocks_on_2x2():
    a, b = make_starts(SamplingConfig(num_starts=2), Mesh2D(2, 2), 1e-6)
    assert np.array_equal(a, [1, 1, 1e-6, 1e-6]) and np.array_equal(b, [1e-6, 1e-6, 1, 1])
    assert cos_sim(a, b) < 1e-5


def test_eight_blocks_nearly_orthogonal():
    starts = make_starts(SamplingConfig(num_starts=8), Mesh2D(60, 30), 1e-6)
    for i in range(8):
        for j in range(i + 1, 8):
            assert cos_sim(starts[i], starts[j]) <= 8 * 1e-6 * 1800


def test_uniform_levels():
    levels = [s[0] for s in make_starts(SamplingConfig(num_starts=3, start_kind="uniformLevels"), Mesh2D(3, 3))]
    assert np.allclose(levels, [0.1, 0.5, 0.9])
    one = make_starts(SamplingConfig(num_starts=1, start_kind="uniformLevels"), Mesh2D(3, 3))
    assert np.allclose(one[0], 0.5)


def test_mixed_89_distinct_and_seeded():
    cfg = SamplingConfig(num_starts=89, start_kind="mixed", rng_seed=4)
    starts = make_starts(cfg, Mesh2D(60, 30))
    assert len(starts) == 89
    X = np.vstack(starts)
    assert len(np.unique(X, axis=0)) == 89
    assert np.all(X >= 1e-6) and np.all(X <= 1)
    again = np.vstack(make_starts(cfg, Mesh2D(60, 30)))
    assert np.array_equal(X, again)
    assert set(np.unique(X[:8])) == {1e-6, 1.0}


def test_config_validation():
    with pytest.raises(ConfigError, match="start_kind"):
        SamplingConfig(start_kind="zigzag")
    with pytest.raises(ConfigError, match="t_fix"):
        SamplingConfig(t_fix=100, max_iter=100)
    with pytest.raises(ConfigError, match="eta_max_after_fix"):
        SamplingConfig(eta_max_after_fix=0.5)
    with pytest.raises(ConfigError, match="num_starts"):
        make_starts(SamplingConfig(num_starts=10), Mesh2D(3, 3))
    with pytest.raises(ConfigError, match="unknown"):
        SamplingConfig.from_dict({"bogus": 1})


@pytest.fixture(scope="module")
def problem():
    return Problem(ProblemSpec(nelx=16, nely=8))


def test_group_saves_six_designs_and_freezes_gradient(problem):
    cfg = SamplingConfig(num_starts=2)
    start = make_starts(cfg, problem.mesh)[0]
    res = run_group(start, problem, cfg, record_gradients=True)
    assert [s.iteration for s in res.samples] == [0, 20, 40, 60, 80, 100]
    assert res.samples[0].is_start and not res.aborted
    frozen = res.gradients[cfg.t_fix]  # gradient used at iteration t_fix + 1
    for g in res.gradients[cfg.t_fix:]:
        assert g is frozen or np.array_equal(g, frozen)
    assert not np.array_equal(res.gradients[0], res.gradients[cfg.t_fix])
    # move limit drops to eta_max_after_fix once the gradient is frozen
    assert max(res.max_change[cfg.t_fix:]) <= cfg.eta_max_after_fix + 1e-12


def test_frozen_gradient_is_the_live_gradient_at_t_fix(problem):
    cfg = SamplingConfig(num_starts=2, max_iter=10, save_interval=5)
    start = make_starts(cfg, problem.mesh)[1]
    res = run_group(start, problem, cfg, record_gradients=True)
    live = run_group(start, problem, cfg, freeze=False, record_gradients=True)
    # identical up to and including the step that uses rho_{t_fix}
    assert np.array_equal(res.gradients[cfg.t_fix], live.gradients[cfg.t_fix])
    assert not np.array_equal(res.gradients[-1], live.gradients[-1])


def test_feasibility_after_warm_up(problem):
    cfg = SamplingConfig(num_starts=3)
    samples, groups = run_sampling(problem, cfg)
    for s in samples.samples:
        assert np.all(s.design >= problem.spec.rho_min) and np.all(s.design <= 1)
        if s.iteration > cfg.t_fix:
            assert problem.volume_fraction(s.design) - problem.spec.volfrac <= 1e-3


def test_reference_group(problem):
    cfg = SamplingConfig(num_starts=2)
    ref = run_reference_group(problem, cfg, group_id=2)
    assert [s.iteration for s in ref.samples] == [20, 40, 60, 80, 100]
    assert all(s.reference_group for s in ref.samples)
    samples, _ = run_sampling(problem, cfg)
    assert samples.reference_group_ids == [2]
    best = samples.samples[samples.reference_index()]
    assert best.clipped_J == min(s.clipped_J for s in samples.samples if s.reference_group)
    off, _ = run_sampling(problem, SamplingConfig(num_starts=2, include_reference_group=False))
    assert sorted(set(off.group_ids.tolist())) == [0, 1]
    assert len(samples.without_reference()) == len(off)


def test_determinism_and_workers(problem):
    cfg = SamplingConfig(num_starts=3, max_iter=20, save_interval=10)
    a, _ = run_sampling(problem, cfg)
    b, _ = run_sampling(problem, cfg)
    c, _ = run_sampling(problem.spec, SamplingConfig(num_starts=3, max_iter=20, save_interval=10, workers=2))
    for x, y, z in zip(a.samples, b.samples, c.samples):
        assert np.array_equal(x.design, y.design) and x.raw_J == y.raw_J
        assert np.array_equal(x.design, z.design) and x.raw_J == z.raw_J


def test_live_objective_flag_does_not_change_designs(problem):
    base = SamplingConfig(num_starts=2, max_iter=30, save_interval=10)
    off = SamplingConfig(num_starts=2, max_iter=30, save_interval=10, live_objective=False)
    a, _ = run_sampling(problem, base)
    b, _ = run_sampling(problem, off)
    for x, y in zip(a.samples, b.samples):
        assert np.array_equal(x.design, y.design) and x.raw_J == y.raw_J


def test_unfrozen_samples_cluster_more(problem):
    # without freezing, late samples of a group collapse onto the optimizer's path
    frozen, _ = run_sampling(problem, SamplingConfig(num_starts=4, include_reference_group=False))
    free, _ = run_sampling(problem, SamplingConfig(num_starts=4, include_reference_group=False, freeze_gradient=False))

    def spread(ss):
        X = np.vstack([s.design for s in ss.samples if s.iteration >= 40])
        return np.linalg.norm(X - X.mean(axis=0), axis=1).mean()

    assert spread(free) < spread(frozen)


def test_thermal_group_runs():
    prob = Problem(ProblemSpec(preset="fig12-heatsink", nelx=12, nely=12, volfrac=0.6, sink_cells=4,
                               objective=ObjectiveSpec("pNormMaxTemp")))
    samples, groups = run_sampling(prob, SamplingConfig(num_starts=2, max_iter=20, save_interval=10))
    assert not samples.aborted_groups
    assert len(samples) == 2 * 3 + 2
