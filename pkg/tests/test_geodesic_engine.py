import math

import numpy as np
import pytest

import oracles
from cutlab.errors import DomainError, IntegrationError
from cutlab.geodesic_engine import conjugate_time, end_state, exp_map, jacobi_profile, shoot
from cutlab.manifold import SurfaceSpec, catalog, frame_at, from_params, random_points


@pytest.fixture(scope="module")
def surfaces():
    return catalog()


@pytest.mark.parametrize("theta", [0.0, 1.0, 2.5, 4.0])
def test_sphere_north_pole_to_south_pole(surfaces, theta):
    x = exp_map(surfaces["sphere"], [0, 0, 1], theta, math.pi)
    np.testing.assert_allclose(x, [0, 0, -1], atol=1e-6)


def test_sphere_great_circle_closed_form(surfaces):
    s = surfaces["sphere"]
    rng = np.random.default_rng(4)
    for p in random_points(s, 5, rng):
        th = rng.uniform(0, 2 * math.pi)
        f = frame_at(s, p)
        v = f.direction(th)
        for t in (0.3, 1.7, 3.0):
            np.testing.assert_allclose(exp_map(s, p, th, t), math.cos(t) * p + math.sin(t) * v, atol=1e-9)


def test_flat_straight_line(surfaces):
    np.testing.assert_allclose(exp_map(surfaces["flat_torus"], [0, 0], 0.0, 0.3), [0.3, 0.0], atol=1e-12)


def test_flat_ode_matches_line(surfaces):
    s = surfaces["flat_torus"]
    g = shoot(s, [0.1, 0.2], 0.7, 2.3)
    np.testing.assert_allclose(g.chart[-1], [0.1 + 2.3 * math.cos(0.7), 0.2 + 2.3 * math.sin(0.7)], atol=1e-12)
    np.testing.assert_allclose(g.j, g.t, atol=1e-12)
    assert np.all(g.points >= 0) and np.all(g.points < 1)


def test_torus_outer_equator_closes(surfaces):
    s = surfaces["torus"]
    p = np.array([3.0, 0.0, 0.0])
    f = frame_at(s, p)
    th = f.angle_of(np.array([0.0, 1.0, 0.0]))
    x = exp_map(s, p, th, 6 * math.pi)
    np.testing.assert_allclose(x, p, atol=1e-5)


def test_sphere_jacobi_is_sine(surfaces):
    g = shoot(surfaces["sphere"], [0, 0, 1], 0.4, math.pi / 2)
    assert g.j[-1] == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(g.j, np.sin(g.t), atol=1e-9)


def test_sphere_radius_two_jacobi(surfaces):
    s = SurfaceSpec.sphere(2.0)
    g = shoot(s, [0, 0, 2], 1.1, 7.0)
    np.testing.assert_allclose(g.j, 2 * np.sin(g.t / 2), atol=1e-8)
    assert jacobi_profile(g).first_zero == pytest.approx(2 * math.pi, abs=1e-5)


def test_flat_jacobi_has_no_zero(surfaces):
    g = shoot(surfaces["flat_torus"], [0, 0], 0.3, 5.0)
    assert jacobi_profile(g).first_zero is None


@pytest.mark.parametrize("theta", np.linspace(0, 2 * math.pi, 7)[:-1])
def test_sphere_conjugate_time_pi(surfaces, theta):
    assert conjugate_time(surfaces["sphere"], [0.6, 0.0, 0.8], theta) == pytest.approx(math.pi, abs=1e-4)


def test_flat_conjugate_time_absent(surfaces):
    s = surfaces["flat_torus"]
    assert conjugate_time(s, [0.2, 0.2], 1.0, t_max=10) is None
    assert conjugate_time(s.replace(backend="ode"), [0.2, 0.2], 1.0, t_max=10) is None


def test_torus_outer_equator_conjugate_time(surfaces):
    # K = 1/3 along the outer equator: j'' + j/3 = 0 vanishes at pi sqrt(3)
    s = surfaces["torus"]
    p = np.array([3.0, 0.0, 0.0])
    th = frame_at(s, p).angle_of(np.array([0.0, 1.0, 0.0]))
    assert conjugate_time(s, p, th) == pytest.approx(math.pi * math.sqrt(3), abs=1e-3)


def test_conjugate_time_agrees_with_profile(surfaces):
    s = surfaces["ellipsoid"]
    p = from_params(s, 1.0, 0.3)
    k = conjugate_time(s, p, 0.8)
    g = shoot(s, p, 0.8, k + 0.5)
    assert jacobi_profile(g).first_zero == pytest.approx(k, abs=1e-9)


def test_ellipsoid_against_independent_integrator(surfaces):
    s = surfaces["ellipsoid"]
    rng = np.random.default_rng(5)
    for p in random_points(s, 4, rng):
        th = rng.uniform(0, 2 * math.pi)
        L = rng.uniform(0.5, 4.0)
        np.testing.assert_allclose(exp_map(s, p, th, L), oracles.ellipsoid_geodesic((1, 1, 0.8), p, th, L), atol=1e-9)


@pytest.mark.parametrize("name", ["sphere", "ellipsoid", "torus"])
def test_reversibility(surfaces, name):
    s = surfaces[name]
    p = random_points(s, 1, np.random.default_rng(6))[0]
    e = end_state(s, p, 1.2, 2.7)
    back = frame_at(s, e.point).angle_of(-e.tangent)
    np.testing.assert_allclose(exp_map(s, e.point, back, 2.7), p, atol=1e-9)


def test_step_refinement_fourth_order(surfaces):
    s = surfaces["torus"]
    p = from_params(s, 0.3, 0.9)
    ref = end_state(s, p, 0.5, 5.0, h=1e-3).point
    e1 = np.linalg.norm(end_state(s, p, 0.5, 5.0, h=0.04).point - ref)
    e2 = np.linalg.norm(end_state(s, p, 0.5, 5.0, h=0.02).point - ref)
    assert 10 < e1 / e2 < 24


def test_unit_speed_preserved(surfaces):
    g = shoot(surfaces["torus"], from_params(surfaces["torus"], 0.0, 2.0), 0.9, 10.0)
    assert np.max(np.abs(np.linalg.norm(g.tangents, axis=1) - 1)) < 1e-9
    assert g.drift < 1e-9


def test_drift_guard(surfaces):
    with pytest.raises(IntegrationError):
        shoot(surfaces["torus"], from_params(surfaces["torus"], 0.0, 2.0), 0.9, 10.0, h=0.5)


def test_invalid_length_and_step(surfaces):
    with pytest.raises(DomainError):
        shoot(surfaces["sphere"], [0, 0, 1], 0.0, 0.0)
    with pytest.raises(DomainError):
        shoot(surfaces["sphere"], [0, 0, 1], 0.0, 1.0, h=-1)
    with pytest.raises(DomainError):
        conjugate_time(surfaces["sphere"], [0, 0, 1], 0.0, t_max=-1)


def test_samples_end_exactly_at_length(surfaces):
    g = shoot(surfaces["sphere"], [0, 0, 1], 0.0, 1.0005)
    assert g.t[-1] == 1.0005
    rows = g.to_rows()
    assert rows.shape == (len(g.t), len(g.columns()))
