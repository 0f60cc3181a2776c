import numpy as np
import pytest

from _oracles import SURFACES, grid_face_mean_gap, jittered_grid
from nlindex.landscape import (DegeneracyError, analyze, barycentric_weights, build_surface, interpolate,
                               lower_convex_hull, nonlinearity_index, normalize)

# 500 x 500 per-face oracle values on jittered_grid(8, seed=0), see tests/_oracles.py
ORACLE = {"flat": 0.0, "paraboloid": 2.864724828734376e-13, "two-valley": 0.01829931529417646}


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def cloud(n=60, seed=0):
    return np.random.default_rng(seed).uniform(-1, 1, (n, 2))


def bumpy(P):
    return np.sin(3 * P[:, 0]) * np.cos(2 * P[:, 1]) + 0.3 * P[:, 0]


def test_normalize_examples():
    v, lo, hi = normalize([2, 4, 6])
    assert np.array_equal(v, [0, 0.5, 1]) and (lo, hi) == (2, 6)
    with pytest.warns(RuntimeWarning, match="flat"):
        v, _, _ = normalize([3, 3, 3])
    assert np.array_equal(v, [0, 0, 0])


def test_interpolant_reproduces_vertices_and_centroids():
    P = cloud(20, 1)
    s = build_surface(P, bumpy(P))
    assert np.allclose(s(s.points), s.values, atol=1e-14)
    for t in s.triangles[:5]:
        assert interpolate(s, s.points[t].mean(axis=0))[0] == pytest.approx(s.values[t].mean(), abs=1e-14)


def test_outside_query_asserts():
    s = build_surface(cloud(10), np.arange(10.0))
    with pytest.raises(AssertionError, match="outside"):
        interpolate(s, [[5.0, 5.0]])


def test_flat_is_zero():
    with pytest.warns(RuntimeWarning):
        s, e, I = analyze(cloud(), np.full(60, 7.0))
    assert I == 0.0 and e.fallback


def test_coplanar_tilted_plane_is_zero():
    P = cloud()
    s, e, I = analyze(P, 2 * P[:, 0] - P[:, 1])
    assert I == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_paraboloid_cloud(seed):
    P = cloud(80, seed)
    _, _, I = analyze(P, (P**2).sum(axis=1))
    assert I <= 0.02


def test_index_in_unit_interval_and_lower_bound():
    for seed in range(5):
        P = cloud(50, seed)
        J = np.random.default_rng(seed).uniform(0, 1, 50)
        s, e, I = analyze(P, J)
        assert 0 <= I <= 1
        assert np.all(e.query_heights <= e.surface_values + 1e-9)


def test_query_count_and_R1():
    P = cloud(30, 2)
    s, e, _ = analyze(P, bumpy(P), R=4)
    assert len(e.query_points) == len(e.faces) * 15
    e1 = lower_convex_hull(s, 1)
    nonlinearity_index(s, e1)
    q = e1.query_points.reshape(-1, 3, 2)
    for f, pts in zip(e1.faces, q):
        assert {tuple(p) for p in pts} == {tuple(p) for p in s.points[f]}
    assert np.allclose(e1.gaps, 0, atol=1e-15)
    with pytest.raises(ValueError):
        barycentric_weights(0)


def test_tetrahedron_faces_adjacent_to_bottom_apex():
    P = np.array([[0, 0], [1, 0], [0, 1], [0.3, 0.3]])
    s, e, I = analyze(P, np.array([1.0, 1.0, 1.0, 0.0]))
    assert len(e.faces) == 3 and all(3 in f for f in e.faces)
    assert I > 0
    # apex above: only the base triangle faces down
    s, e, I = analyze(P, np.array([0.0, 0.0, 0.0, 1.0]))
    assert len(e.faces) == 1 and set(e.faces[0]) == {0, 1, 2}


def test_lower_faces_point_down():
    P = cloud(40, 3)
    s, e, _ = analyze(P, bumpy(P))
    L = np.column_stack([s.points, s.values])[e.faces]
    n = np.cross(L[:, 1] - L[:, 0], L[:, 2] - L[:, 0])
    assert np.all(n[:, 2] < 0)


@pytest.mark.parametrize("theta", [0.3, 1.7, np.pi])
def test_isometry_invariance(theta):
    P = cloud(50, 4)
    J = bumpy(P)
    I0 = analyze(P, J)[2]
    assert abs(analyze(P @ rotation(theta).T + [3, -2], J)[2] - I0) <= 1e-10
    assert abs(analyze(P * [-1, 1], J)[2] - I0) <= 1e-10


@pytest.mark.parametrize("alpha,beta", [(3.0, 0.0), (0.01, 5.0), (1e4, -2.0)])
def test_affine_objective_invariance(alpha, beta):
    P = cloud(50, 5)
    J = bumpy(P)
    assert abs(analyze(P, alpha * J + beta)[2] - analyze(P, J)[2]) <= 1e-12


def test_refinement_converges_to_face_mean():
    # equal lattice weights over-count face boundaries, so the bias is O(1/R)
    P = jittered_grid()
    J = SURFACES["two-valley"](P)
    err = [abs(analyze(P, J, R=R)[2] - ORACLE["two-valley"]) for R in (10, 20, 40, 80)]
    assert all(a > b for a, b in zip(err, err[1:]))
    assert err[-1] * 80 == pytest.approx(err[0] * 10, rel=0.25)


@pytest.mark.parametrize("name", list(ORACLE))
def test_matches_dense_grid_oracle(name):
    P = jittered_grid()
    J = SURFACES[name](P)
    if name == "flat":
        with pytest.warns(RuntimeWarning):
            I = analyze(P, J)[2]
    else:
        I = analyze(P, J)[2]
    assert abs(I - ORACLE[name]) <= 1e-3


def test_oracle_values_are_reproducible():
    P = jittered_grid()
    assert grid_face_mean_gap(P, SURFACES["two-valley"](P), n=100) == pytest.approx(ORACLE["two-valley"], abs=1e-5)


def test_duplicates_merged_keeping_minimum():
    P = cloud(10, 7)
    P2 = np.vstack([P, P[3] + 1e-14])
    J = np.arange(11.0)
    J[10] = -1.0
    s = build_surface(P2, J)
    assert len(s.points) == 10
    assert s.sample_to_point[10] == s.sample_to_point[3]
    assert s.values[s.sample_to_point[3]] == 0.0


def test_collinear_jitter_and_error():
    P = np.column_stack([np.linspace(0, 1, 8), np.zeros(8)])
    J = (P[:, 0] - 0.5) ** 2
    s = build_surface(P, J)
    assert s.jitter == pytest.approx(1e-9)
    assert np.array_equal(build_surface(P, J).points, s.points)
    with pytest.raises(DegeneracyError, match="jitter"):
        build_surface(P, J, jitter=None)
    with pytest.raises(DegeneracyError):
        build_surface(np.zeros((5, 2)), np.arange(5.0))
