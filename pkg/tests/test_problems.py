import numpy as np
import pytest

from nlindex.fem import Mesh2D
from nlindex.problems import (CLIP_BOUNDS, ConfigError, DensityFilter, ObjectiveSpec, Problem, ProblemSpec,
                              clip_objective, density_filter, pnorm)


def filter_oracle(nelx, nely, rho, r):
    """Direct double loop over element pairs."""
    rho = rho.reshape(nelx, nely)
    out = np.zeros_like(rho)
    for i in range(nelx):
        for j in range(nely):
            num = den = 0.0
            for k in range(nelx):
                for m in range(nely):
                    w = max(0.0, r - np.hypot(i - k, j - m))
                    num += w * rho[k, m]
                    den += w
            out[i, j] = num / den
    return out.ravel()


def test_filter_spike_matches_double_loop():
    rho = np.zeros(25)
    rho[12] = 1.0
    got = density_filter(Mesh2D(5, 5), rho, 2.5)
    assert np.allclose(got, filter_oracle(5, 5, rho, 2.5), atol=1e-15)


def test_filter_random_rectangular():
    rng = np.random.default_rng(1)
    rho = rng.uniform(size=7 * 4)
    assert np.allclose(density_filter(Mesh2D(7, 4), rho, 1.8), filter_oracle(7, 4, rho, 1.8), atol=1e-14)


def test_filter_constant_and_identity():
    m = Mesh2D(6, 5)
    assert np.allclose(density_filter(m, np.full(30, 0.37), 2.5), 0.37)
    x = np.random.default_rng(2).uniform(size=30)
    assert np.array_equal(density_filter(m, x, 0.5), x)
    assert np.array_equal(density_filter(m, x, 1.0), x)


def test_filter_backprop_is_adjoint():
    f = DensityFilter(Mesh2D(8, 5), 2.5)
    rng = np.random.default_rng(3)
    x, y = rng.normal(size=40), rng.normal(size=40)
    assert np.isclose(f(x) @ y, x @ f.backprop(y))


def test_clip_examples():
    assert clip_objective(3e4, ObjectiveSpec("compliance")) == 1e4
    assert clip_objective(12, ObjectiveSpec("pNormStress")) == 12
    assert clip_objective(2e6, ObjectiveSpec("tempVariance")) == 1e6
    assert CLIP_BOUNDS == {"compliance": 1e4, "pNormStress": 50.0, "thermalCompliance": 1e6,
                           "pNormMaxTemp": 1e4, "tempVariance": 1e6, "fluidDissipation": 1e2}


def test_pnorm_examples():
    J, _ = pnorm([3.0, 4.0], 2)
    assert J == pytest.approx(5.0, abs=1e-14)
    J, _ = pnorm([3.0, 4.0], 200)
    assert 4.0 <= J <= 4.0 * 2 ** (1 / 200)


def test_pnorm_no_overflow_and_gradient():
    x = np.array([1e300, 3e299, 1.0])
    J, dJ = pnorm(x, 50)
    assert np.isfinite(J) and 1e300 <= J <= 1e300 * 3 ** (1 / 50)
    rng = np.random.default_rng(4)
    v = rng.uniform(0.1, 2, 6)
    _, g = pnorm(v, 7, 2.0)
    h = 1e-6
    for i in range(6):
        e = np.zeros(6)
        e[i] = h
        fd = (pnorm(v + e, 7, 2.0)[0] - pnorm(v - e, 7, 2.0)[0]) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-6, abs=1e-8)


def small(kind, **kw):
    if kind in ("compliance", "pNormStress"):
        spec = ProblemSpec(nelx=12, nely=6, objective=ObjectiveSpec(kind, **kw))
    else:
        spec = ProblemSpec(preset="fig12-heatsink", nelx=10, nely=10, volfrac=0.6, sink_cells=4,
                           objective=ObjectiveSpec(kind, **kw))
    return Problem(spec)


@pytest.mark.parametrize("kind", ["compliance", "pNormStress", "thermalCompliance", "pNormMaxTemp", "tempVariance"])
def test_gradient_central_differences(kind):
    prob = small(kind)
    rng = np.random.default_rng(11)
    rho = rng.uniform(0.2, 0.9, prob.n)
    ev = prob.evaluate(rho)
    h = 1e-6
    idx = rng.choice(prob.n, 12, replace=False)
    scale = np.abs(ev.gradient).max()
    for i in idx:
        e = np.zeros(prob.n)
        e[i] = h
        fd = (prob.evaluate(rho + e, gradient=False).objective - prob.evaluate(rho - e, gradient=False).objective) / (2 * h)
        assert abs(ev.gradient[i] - fd) <= 1e-4 * scale


def test_sign_of_compliance_gradients():
    for kind in ("compliance", "thermalCompliance"):
        prob = small(kind)
        g = prob.evaluate(np.random.default_rng(0).uniform(0.1, 1, prob.n)).gradient
        assert np.all(g <= 0)


def test_pnorm_stress_bounds_on_designs():
    prob = small("pNormStress", p_agg=8)
    for seed in range(3):
        rho = np.random.default_rng(seed).uniform(0.05, 1, prob.n)
        ev = prob.evaluate(rho, gradient=False)
        sigma, _ = prob.element_stresses(ev.state, prob.filter(rho))
        assert sigma.max() <= ev.objective <= prob.n ** (1 / 8) * sigma.max() * (1 + 1e-12)


def test_uniform_temperature_gives_zero_variance():
    prob = small("tempVariance")
    T = np.full(prob.mesh.n_node, -2.5)
    assert np.allclose(prob.element_temperatures(T), -2.5)
    # all-sink boundary with zero source leaves T = 0 everywhere
    spec = ProblemSpec(preset="fig12-heatsink", nelx=6, nely=6, volfrac=0.6, sink_cells=6, heat_source=0.0,
                       objective=ObjectiveSpec("tempVariance"))
    ev = Problem(spec).evaluate(np.full(36, 0.5))
    assert ev.objective == 0.0 and np.all(ev.gradient == 0.0)


def test_baselines_from_independent_oracle():
    # values from a dense 88-line style script, see the oracle notes
    p = Problem(ProblemSpec())
    assert p.evaluate(np.full(p.n, 0.5), gradient=False).objective == pytest.approx(339.92809093440326, rel=1e-9)
    p = Problem(ProblemSpec(preset="fig12-heatsink", nelx=20, nely=20, volfrac=0.6, sink_cells=4,
                            objective=ObjectiveSpec("thermalCompliance")))
    assert p.evaluate(np.full(p.n, 0.6), gradient=False).objective == pytest.approx(60.35342986107476, rel=1e-9)


def test_constraint_and_volume():
    p = small("compliance")
    rho = np.linspace(0.1, 0.9, p.n)
    g, dg = p.constraint(rho)
    assert g == pytest.approx(rho.mean() - 0.5)
    assert np.allclose(dg, 1 / p.n)


@pytest.mark.parametrize("bad, field", [
    (dict(preset="nope"), "problem.preset"),
    (dict(volfrac=1.5), "problem.volfrac"),
    (dict(filter_radius=40), "problem.filter_radius"),
    (dict(objective=ObjectiveSpec("thermalCompliance")), "objective.kind"),
])
def test_validation_names_field(bad, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        ProblemSpec(**bad)


def test_objective_validation_and_roundtrip():
    with pytest.raises(ConfigError, match="objective.kind"):
        ObjectiveSpec("bogus")
    with pytest.raises(ConfigError, match="p_agg"):
        ObjectiveSpec("pNormStress", p_agg=1.0)
    spec = ProblemSpec(nelx=10, nely=5, objective=ObjectiveSpec("pNormStress", p_agg=4))
    assert ProblemSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ConfigError, match="unknown"):
        ProblemSpec.from_dict({"bogus": 1})
    with pytest.raises(ConfigError, match="unknown"):
        ProblemSpec.from_dict({"objective": {"kind": "compliance", "bogus": 1}})
