import math

import numpy as np
import pytest

import oracles
from cutlab.connections import connect_points, distance, find_loops, lift_curve, nearest
from cutlab.cutlocus import classify_cut_point, sample_cut_locus
from cutlab.errors import DomainError, LiftObstruction
from cutlab.geodesic_engine import end_state, exp_map, shoot
from cutlab.manifold import SurfaceSpec, catalog, frame_at, from_params, random_points


@pytest.fixture(scope="module")
def surfaces():
    return catalog()


def test_flat_two_translates(surfaces):
    cs = connect_points(surfaces["flat_torus"], [0, 0], [0.3, 0], 1.0)
    assert len(cs) == 2
    np.testing.assert_allclose(cs.lengths, [0.3, 0.7], atol=1e-12)


def test_flat_ode_backend_agrees_with_lattice(surfaces):
    ode = surfaces["flat_torus"].replace(backend="ode")
    cs = connect_points(ode, [0, 0], [0.3, 0], 1.0)
    np.testing.assert_allclose(cs.lengths, [0.3, 0.7], atol=1e-8)


def test_sphere_two_great_circle_arcs(surfaces):
    s = surfaces["sphere"]
    a = np.array([1.0, 0.0, 0.0])
    b = np.array([math.cos(1.0), math.sin(1.0), 0.0])
    cs = connect_points(s, a, b, 2 * math.pi)
    assert len(cs) == 2
    np.testing.assert_allclose(cs.lengths, [1.0, 2 * math.pi - 1.0], atol=1e-5)
    assert all(m.residual < 1e-6 for m in cs)


@pytest.fixture(scope="module")
def ellipsoid_oracle():
    # dense shooting over 4096 angles with an independent integrator
    return oracles.ellipsoid_connections((1, 1, 0.8), (1, 0, 0), (-1, 0, 0), 4.0)


def test_ellipsoid_antipodal_oracle_values(ellipsoid_oracle):
    # two meridians (half the meridian ellipse) and the two equator halves
    L = sorted(l for _, l in ellipsoid_oracle)
    assert len(L) == 4
    np.testing.assert_allclose(L[:2], oracles.half_meridian(1.0, 0.8), atol=1e-9)
    np.testing.assert_allclose(L[2:], math.pi, atol=1e-9)


def test_ellipsoid_antipodal_matches_dense_shooting(surfaces, ellipsoid_oracle):
    cs = connect_points(surfaces["ellipsoid"], [1, 0, 0], [-1, 0, 0], 4.0)
    assert len(cs) == len(ellipsoid_oracle)
    np.testing.assert_allclose(cs.lengths, [l for _, l in ellipsoid_oracle], atol=1e-6)
    for t, _ in ellipsoid_oracle:
        assert min(abs(math.remainder(t - a, 2 * math.pi)) for a in cs.angles) < 1e-5


def test_flat_distance_wraps():
    s = SurfaceSpec.flat_torus(1.0, 2.0)
    assert distance(s, [0, 0], [0.6, 0]) == pytest.approx(0.4, abs=1e-15)


def test_sphere_r2_antipodal_distance():
    s = SurfaceSpec.sphere(2.0)
    assert distance(s, [0, 0, 2], [0, 0, -2]) == pytest.approx(2 * math.pi, abs=1e-4)


def test_ellipsoid_triangle_inequality(surfaces):
    s = surfaces["ellipsoid"]
    rng = np.random.default_rng(11)
    for _ in range(4):
        a, b, c = random_points(s, 3, rng)
        assert distance(s, a, c) <= distance(s, a, b) + distance(s, b, c) + 1e-6


def test_distance_symmetric(surfaces):
    s = surfaces["torus"]
    a, b = random_points(s, 2, np.random.default_rng(12))
    assert distance(s, a, b) == pytest.approx(distance(s, b, a), abs=1e-8)


def test_distance_to_self_is_zero(surfaces):
    assert distance(surfaces["ellipsoid"], [1, 0, 0], [1, 0, 0]) == 0.0
    assert nearest(surfaces["ellipsoid"], [1, 0, 0], [1, 0, 0]) is None


def test_connect_rejects_equal_endpoints(surfaces):
    with pytest.raises(DomainError):
        connect_points(surfaces["sphere"], [0, 0, 1], [0, 0, 1], 3.0)


def test_bvp_roundtrip(surfaces):
    rng = np.random.default_rng(13)
    for name in ("sphere", "ellipsoid", "torus"):
        s = surfaces[name]
        for p in random_points(s, 3, rng):
            th = rng.uniform(0, 2 * math.pi)
            L = rng.uniform(0.2, 1.0)
            x = exp_map(s, p, th, L)
            c = nearest(s, p, x)
            assert c.residual < 1e-6
            assert c.length <= L + 1e-6
            np.testing.assert_allclose(exp_map(s, p, c.theta, c.length), x, atol=1e-6)


def test_members_sorted_by_length_then_angle(surfaces):
    cs = connect_points(surfaces["torus"], from_params(surfaces["torus"], 0, 0), from_params(surfaces["torus"], 2.0, 1.0), 9.0)
    key = [(m.length, m.theta) for m in cs]
    assert key == sorted(key)


def test_connect_deterministic(surfaces):
    s = surfaces["torus"]
    a, b = from_params(s, 0, 0.3), from_params(s, 2.0, 1.0)
    r1 = connect_points(s, a, b, 8.0).record()
    r2 = connect_points(s, a, b, 8.0).record()
    assert r1 == r2


def test_sphere_antipode_continuum(surfaces):
    cs = connect_points(surfaces["sphere"], [0, 0, 1], [0, 0, -1], 3.5)
    assert cs.continuum


def test_flat_loops(surfaces):
    ls = find_loops(surfaces["flat_torus"], [0.3, 0.3], 1.5)
    short = [m for m in ls if m.length < 1 + 1e-9]
    assert len(short) == 2
    np.testing.assert_allclose([m.length for m in short], 1.0)
    assert all(m.closed for m in short)


def test_sphere_loop_is_great_circle(surfaces):
    ls = find_loops(surfaces["sphere"], [0, 0, 1], 2.5 * math.pi)
    assert ls.members[0].length == pytest.approx(2 * math.pi, abs=1e-6)
    assert ls.members[0].closed


def test_torus_inner_equator_loop(surfaces):
    s = surfaces["torus"]
    p = from_params(s, 0.0, math.pi)
    ls = find_loops(s, p, 8.0)
    inner = [m for m in ls if abs(m.length - 2 * math.pi) < 1e-4]
    assert inner and inner[0].closed


def test_flat_lift_inside_cell(surfaces):
    s = surfaces["flat_torus"]
    curve = np.linspace([0.1, 0.1], [0.3, 0.2], 20)
    lc = lift_curve(s, [0, 0], curve)
    np.testing.assert_allclose(lc.vectors, curve, atol=1e-15)
    assert np.max(lc.residuals) == 0.0


def test_sphere_meridian_lift_polar_coordinates(surfaces):
    s = surfaces["sphere"]
    colat = np.linspace(0.5, 2.5, 30)
    curve = np.column_stack([np.sin(colat) * math.cos(0.4), np.sin(colat) * math.sin(0.4), np.cos(colat)])
    lc = lift_curve(s, [0, 0, 1], curve)
    np.testing.assert_allclose(lc.s, colat, atol=1e-6)
    np.testing.assert_allclose(lc.theta % (2 * math.pi), 0.4, atol=1e-6)
    assert np.max(lc.residuals) < 1e-6


def test_ellipsoid_lift_to_non_conjugate_cut_point(surfaces):
    # gamma from q to an interior point x0 of the cut segment, approaching
    # from the side of alpha_1: its lift ends at d(p, x0) alpha_1'(0)
    s = surfaces["ellipsoid"]
    p = from_params(s, math.pi / 2, 0.0)
    samples = sample_cut_locus(s, p, 64)
    x = next(c for c in samples if c.ok and c.count == 2 and not c.essential and abs(c.theta - math.pi / 2) < 0.2)
    cl = classify_cut_point(s, p, x.point, x.sigma)
    assert cl.count == 2 and not cl.essential
    th2, _ = x.competitor
    u1 = end_state(s, p, x.theta, x.sigma).tangent
    u2 = end_state(s, p, th2, x.sigma).tangent
    v = -1.5 * u1 + 0.5 * u2
    q = exp_map(s, x.point, frame_at(s, x.point).angle_of(v / np.linalg.norm(v)), 0.25 * x.sigma)
    g = nearest(s, q, x.point)
    path = shoot(s, q, g.theta, g.length)
    lc = lift_curve(s, p, path.points[:: max(1, len(path.t) // 40)][:-1].tolist() + [path.points[-1].tolist()])
    s_end, th_end = lc.end
    assert s_end == pytest.approx(min(cl.lengths), abs=1e-4)
    assert min(abs(math.remainder(th_end - a, 2 * math.pi)) for a in cl.angles) < 1e-3
    assert abs(math.remainder(th_end - x.theta, 2 * math.pi)) < 1e-3


def test_lift_continues_along_meridian_past_antipode(surfaces):
    # the meridian through the antipode lifts to the ray theta = const; past
    # the tangent cut locus the radius keeps growing with the colatitude
    s = surfaces["sphere"]
    t = np.linspace(2.5, 3.8, 40)
    curve = np.column_stack([np.sin(t), np.zeros_like(t), np.cos(t)])
    lc = lift_curve(s, [0, 0, 1], curve)
    np.testing.assert_allclose(lc.s, t, atol=1e-6)


def test_lift_obstruction_around_antipode(surfaces):
    # a small loop around the conjugate point forces theta once around the
    # circle while the curve barely moves, so the lift jumps
    s = surfaces["sphere"]
    eps = 0.01
    phi = np.linspace(0, 2 * math.pi, 9)
    curve = np.column_stack([eps * np.cos(phi), eps * np.sin(phi), -np.sqrt(1 - eps * eps) * np.ones_like(phi)])
    with pytest.raises(LiftObstruction):
        lift_curve(s, [0, 0, 1], curve)
