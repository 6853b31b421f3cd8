import math

import numpy as np
import pytest

import oracles
from cutlab.connections import nearest
from cutlab.errors import DomainError
from cutlab.geodesic_engine import end_state
from cutlab.manifold import (
    SurfaceSpec,
    Tolerances,
    as_point,
    canonical,
    catalog,
    curvature_at,
    frame_at,
    from_params,
    grid,
    random_points,
    tube_angle,
)


@pytest.fixture(scope="module")
def surfaces():
    return catalog()


def test_sphere_curvature_is_one(surfaces):
    s = surfaces["sphere"]
    for p in random_points(s, 5, np.random.default_rng(1)):
        assert curvature_at(s, p) == pytest.approx(1.0, abs=1e-12)


def test_sphere_radius_two_curvature():
    s = SurfaceSpec.sphere(2.0)
    assert curvature_at(s, [0.0, 2.0, 0.0]) == pytest.approx(0.25, abs=1e-12)


def test_flat_torus_curvature_zero(surfaces):
    assert curvature_at(surfaces["flat_torus"], [0.3, 0.4]) == 0.0


def test_torus_outer_equator_curvature(surfaces):
    s = surfaces["torus"]
    assert curvature_at(s, [3.0, 0.0, 0.0]) == pytest.approx(1 / 3, abs=1e-12)


@pytest.mark.parametrize("tube", [0.0, 0.7, math.pi / 2, 2.0, math.pi])
def test_torus_curvature_closed_form(surfaces, tube):
    s = surfaces["torus"]
    p = from_params(s, 0.4, tube)
    assert tube_angle(s, p) == pytest.approx(math.remainder(tube, 2 * math.pi), abs=1e-12)
    assert curvature_at(s, p) == pytest.approx(oracles.torus_gauss(2.0, 1.0, tube), abs=1e-10)


def test_ellipsoid_curvature_closed_form(surfaces):
    s = surfaces["ellipsoid"]
    for p in random_points(s, 8, np.random.default_rng(2)):
        assert curvature_at(s, p) == pytest.approx(oracles.ellipsoid_gauss((1, 1, 0.8), p), rel=1e-10)
    # pole c^2 / (a^2 b^2), equator a^2 / (b^2 c^2)
    assert curvature_at(s, [0, 0, 0.8]) == pytest.approx(0.64)
    assert curvature_at(s, [1, 0, 0]) == pytest.approx(1 / 0.64)


def test_flat_frame_is_chart_frame(surfaces):
    f = frame_at(surfaces["flat_torus"], [0.2, 0.7])
    np.testing.assert_array_equal(f.e1, [1.0, 0.0])
    np.testing.assert_array_equal(f.e2, [0.0, 1.0])


@pytest.mark.parametrize("name,uv", [("sphere", (0.0, 0.0)), ("ellipsoid", (math.pi / 2, 0.0)), ("torus", (1.1, math.pi / 2))])
def test_frames_orthonormal(surfaces, name, uv):
    s = surfaces[name]
    f = frame_at(s, from_params(s, *uv))
    n = np.cross(f.e1, f.e2)
    assert abs(np.dot(f.e1, f.e2)) < 1e-10
    assert abs(np.linalg.norm(f.e1) - 1) < 1e-10
    assert abs(np.linalg.norm(f.e2) - 1) < 1e-10
    # tangent to the surface: the normal is e1 x e2
    assert abs(np.dot(n, f.e1)) < 1e-10


def test_north_pole_uses_x_axis(surfaces):
    f = frame_at(surfaces["sphere"], [0.0, 0.0, 1.0])
    np.testing.assert_allclose(f.e1, [1.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(f.e2, [0.0, 1.0, 0.0], atol=1e-12)


def test_frame_fallback_to_y_axis(surfaces):
    # at (1,0,0) the x-axis is normal, so e1 comes from the y-axis
    f = frame_at(surfaces["sphere"], [1.0, 0.0, 0.0])
    np.testing.assert_allclose(f.e1, [0.0, 1.0, 0.0], atol=1e-12)


def test_frame_random_points_orthonormal(surfaces):
    rng = np.random.default_rng(3)
    for name in ("sphere", "ellipsoid", "torus"):
        s = surfaces[name]
        for p in random_points(s, 20, rng):
            f = frame_at(s, p)
            G = np.array([f.e1, f.e2]) @ np.array([f.e1, f.e2]).T
            assert np.max(np.abs(G - np.eye(2))) < 1e-10


def test_angle_of_round_trip(surfaces):
    f = frame_at(surfaces["ellipsoid"], from_params(surfaces["ellipsoid"], 1.0, 2.0))
    for th in (0.0, 1.0, 3.0, 5.5):
        assert abs(math.remainder(f.angle_of(f.direction(th)) - th, 2 * math.pi)) < 1e-12


def test_off_surface_point_rejected(surfaces):
    with pytest.raises(DomainError):
        as_point(surfaces["sphere"], [1.0, 0.1, 0.0])
    with pytest.raises(DomainError):
        as_point(surfaces["sphere"], [1.0, 0.0])
    with pytest.raises(DomainError):
        as_point(surfaces["flat_torus"], [np.nan, 0.0])


def test_flat_points_reduced(surfaces):
    s = surfaces["flat_torus"]
    np.testing.assert_allclose(as_point(s, [1.25, -0.25]), [0.25, 0.75])
    np.testing.assert_allclose(canonical(s, [-1e-18, 0.0]), [0.0, 0.0])


def test_invalid_parameters():
    with pytest.raises(DomainError):
        SurfaceSpec.sphere(-1.0)
    with pytest.raises(DomainError):
        SurfaceSpec.torus(1.0, 2.0)
    with pytest.raises(DomainError):
        SurfaceSpec.sphere(1.0, backend="mesh")


def test_every_tolerance_has_a_default():
    t = Tolerances()
    for f in t.__dataclass_fields__:
        assert getattr(t, f) is not None


def test_grid_on_surface(surfaces):
    for name in ("sphere", "ellipsoid", "torus"):
        s = surfaces[name]
        pts = grid(s, 8)
        assert pts.shape == (64, 3)
        for x in pts:
            as_point(s, x)


def test_seeded_points_reproducible(surfaces):
    s = surfaces["torus"]
    a = random_points(s, 4, np.random.default_rng(7))
    b = random_points(s, 4, np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("name", ["sphere", "ellipsoid", "torus"])
def test_curvature_matches_geodesic_triangle_excess(surfaces, name):
    # Gauss-Bonnet on a small geodesic triangle: angle excess = integral of K
    s = surfaces[name]
    p = from_params(s, 1.0, 0.5)
    eps = 0.05
    b = end_state(s, p, 0.0, eps).point
    c = end_state(s, p, math.pi / 2, eps).point
    angles = []
    for x, y, z in ((p, b, c), (b, c, p), (c, p, b)):
        t1 = nearest(s, x, y).theta
        t2 = nearest(s, x, z).theta
        angles.append(abs(math.remainder(t1 - t2, 2 * math.pi)))
    excess = sum(angles) - math.pi
    # area of the nearly-right triangle with legs eps
    area = 0.5 * eps * eps
    assert excess == pytest.approx(curvature_at(s, p) * area, rel=0.1)
