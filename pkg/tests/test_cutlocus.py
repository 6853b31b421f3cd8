import math

import numpy as np
import pytest

import oracles
from cutlab.cutlocus import (
    classify_cut_point,
    cut_sample,
    cut_time,
    discrete_local_minima,
    golden_min,
    radii_report,
    sample_cut_locus,
)
from cutlab.errors import PreconditionError
from cutlab.manifold import SurfaceSpec, catalog, from_params


@pytest.fixture(scope="module")
def surfaces():
    return catalog()


@pytest.fixture(scope="module")
def sphere_atlas(surfaces):
    return sample_cut_locus(surfaces["sphere"], [0, 0, 1], 64)


@pytest.mark.parametrize("theta", [0.0, 1.3, 4.0])
def test_sphere_cut_time_is_pi(surfaces, theta):
    assert cut_time(surfaces["sphere"], [0.0, 0.6, 0.8], theta) == pytest.approx(math.pi, abs=1e-6)


def test_flat_cut_time_diagonal(surfaces):
    assert cut_time(surfaces["flat_torus"], [0.1, 0.2], math.pi / 4) == pytest.approx(math.sqrt(2) / 2, abs=1e-15)


def test_flat_cut_time_ode_backend(surfaces):
    s = surfaces["flat_torus"].replace(backend="ode")
    assert cut_time(s, [0.1, 0.2], 0.3) == pytest.approx(0.5 / math.cos(0.3), abs=1e-6)


def test_ellipsoid_meridian_cut_at_antipode(surfaces):
    # from an equator point the two meridians meet at the antipode after
    # half a meridian ellipse, before either is conjugate
    c = cut_sample(surfaces["ellipsoid"], [1, 0, 0], math.pi / 2)
    assert c.sigma == pytest.approx(oracles.half_meridian(1.0, 0.8), abs=1e-6)
    np.testing.assert_allclose(c.point, [-1, 0, 0], atol=1e-6)
    assert c.count == 2 and not c.essential
    assert c.kappa > c.sigma


def test_ellipsoid_equator_endpoint_is_conjugate(surfaces):
    # K = 1/c^2 on the equator of the oblate ellipsoid, so j vanishes at pi c
    c = cut_sample(surfaces["ellipsoid"], [1, 0, 0], 0.0)
    assert c.sigma == pytest.approx(math.pi * 0.8, abs=1e-6)
    assert c.kappa == pytest.approx(c.sigma, abs=1e-9)
    assert c.count == 1 and c.essential


def test_cut_time_bounded_by_conjugate_time(surfaces):
    s = surfaces["ellipsoid"]
    p = from_params(s, 0.7, 0.4)
    for k in range(0, 64, 16):
        c = cut_sample(s, p, 2 * math.pi * k / 64)
        assert c.kappa is None or c.sigma <= c.kappa + 1e-12


def test_sphere_atlas_all_essential(sphere_atlas):
    assert len(sphere_atlas) == 64
    assert all(s.ok and s.essential and s.continuum for s in sphere_atlas)
    np.testing.assert_allclose([s.sigma for s in sphere_atlas], math.pi, atol=1e-6)
    for s in sphere_atlas:
        np.testing.assert_allclose(s.point, [0, 0, -1], atol=1e-6)


def test_flat_atlas_is_voronoi_boundary(surfaces):
    samples = sample_cut_locus(surfaces["flat_torus"], [0.2, 0.3], 64)
    assert not any(s.essential for s in samples)
    sig = np.array([s.sigma for s in samples])
    th = np.array([s.theta for s in samples])
    np.testing.assert_allclose(sig, 0.5 / np.maximum(np.abs(np.cos(th)), np.abs(np.sin(th))), atol=1e-15)


def test_atlas_needs_64_directions(surfaces):
    with pytest.raises(PreconditionError):
        sample_cut_locus(surfaces["sphere"], [0, 0, 1], 32)


def test_flat_edge_point_has_two_geodesics(surfaces):
    cl = classify_cut_point(surfaces["flat_torus"], [0, 0], [0.5, 0], 0.5)
    assert cl.count == 2
    assert not any(cl.conjugate) and not cl.essential
    assert sorted(round(a, 12) for a in cl.angles) == [0.0, round(math.pi, 12)]


def test_flat_vertex_has_four_geodesics(surfaces):
    cl = classify_cut_point(surfaces["flat_torus"], [0, 0], [0.5, 0.5], math.sqrt(0.5))
    assert cl.count == 4


def test_sphere_antipode_continuum_is_essential(surfaces):
    cl = classify_cut_point(surfaces["sphere"], [0, 0, 1], [0, 0, -1], math.pi)
    assert cl.continuum and cl.essential
    assert all(cl.conjugate)


def test_classify_rejects_wrong_distance(surfaces):
    # the antipode of (1,0,0) on the ellipsoid is closer than pi
    with pytest.raises(PreconditionError):
        classify_cut_point(surfaces["ellipsoid"], [1, 0, 0], [-1, 0, 0], math.pi)


def test_golden_min_kink():
    x, fx = golden_min(lambda t: 1 + abs(t - 0.3), 0.0, 1.0, 1e-9)
    assert x == pytest.approx(0.3, abs=1e-8)
    assert fx == pytest.approx(1.0)


def test_discrete_local_minima_circular():
    v = np.array([0.0, 1.0, 2.0, 1.0, 3.0, 4.0, 1.0])
    assert sorted(discrete_local_minima(v)) == [0, 3]


def test_sphere_radii(surfaces):
    r = radii_report(surfaces["sphere"], [0, 0, 1])
    assert r.injrad == pytest.approx(math.pi, abs=1e-6)
    assert r.conj == pytest.approx(math.pi, abs=1e-6)
    assert r.conj_eps == pytest.approx(math.pi, abs=1e-6)
    assert r.shortest_loop == pytest.approx(2 * math.pi, abs=1e-6)
    assert r.loop_closed
    assert r.relative_residual < 1e-6


def test_flat_rectangle_radii():
    r = radii_report(SurfaceSpec.flat_torus(1.0, 2.0), [0, 0])
    assert r.injrad == 0.5
    assert r.conj is None and r.conj_eps is None
    assert r.shortest_loop == pytest.approx(1.0, abs=1e-12)
    assert r.relative_residual == 0.0


def test_torus_inner_equator_radii(surfaces):
    # on the inner equator the shortest loop is the inner circle of length
    # 2 pi (R - r), and half of it bounds the injectivity radius
    s = surfaces["torus"]
    r = radii_report(s, from_params(s, 0.0, math.pi))
    assert r.relative_residual < 0.02
    assert r.injrad <= math.pi * (2.0 - 1.0) + 1e-6
