"""Arclength geodesics, scalar Jacobi fields and conjugate times.

Geodesics are integrated with fixed-step classical RK4 on the coupled
system (position, unit tangent, j, j'), where j solves j'' + K j = 0 with
j(0) = 0, j'(0) = 1.  On a surface this j is the normal component of the
Jacobi field generated by rotating the initial direction, so its zeros are
the conjugate points of the base point along the geodesic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import DomainError, IntegrationError
from .manifold import as_point, canonical, kernel_frame, unpad


@dataclass(frozen=True)
class Geodesic:
    """Unit-speed geodesic sampled at uniform arclength steps.

    ``points`` are canonical surface points (flat-torus samples reduced to
    the fundamental domain); ``chart`` keeps the unreduced flat-torus chart
    coordinates and equals ``points`` on embedded families.
    """

    surface: object
    start: np.ndarray
    theta: float
    length: float
    step: float
    t: np.ndarray
    points: np.ndarray
    tangents: np.ndarray
    j: np.ndarray
    dj: np.ndarray
    drift: float

    @property
    def endpoint(self):
        return self.points[-1]

    @property
    def chart(self):
        return self._chart

    def to_rows(self):
        """Rows (t, coordinates..., tangent components..., j, j')."""
        return np.column_stack([self.t, self.points, self.tangents, self.j, self.dj])

    def columns(self):
        if self.surface.is_flat:
            return ["t", "u", "v", "tu", "tv", "j", "dj"]
        return ["t", "x", "y", "z", "tx", "ty", "tz", "j", "dj"]


def _check_drift(surface, drift, t):
    if drift > surface.tol.energy_drift:
        raise IntegrationError(
            f"speed drift {drift:.3e} exceeds {surface.tol.energy_drift:.1e}; reduce the step size", t
        )


def shoot(surface, p, theta, length, h=None):
    """Integrate the geodesic from p with initial direction angle theta.

    The initial tangent is cos(theta) e1 + sin(theta) e2 in ``frame_at(p)``;
    the number of steps is ceil(length / h) so the final sample sits exactly
    at arclength ``length``.
    """
    if not length > 0:
        raise DomainError("geodesic length must be positive")
    h = surface.h if h is None else h
    if not h > 0:
        raise DomainError("step size must be positive")
    p = as_point(surface, p)
    x0, e1, e2 = kernel_frame(surface, p)
    y0 = K.initial_state(x0, e1, e2, float(theta))
    path, drift = K.shoot_path(surface.code, surface.kparams, y0, float(length), float(h), 1)
    n = path.shape[0] - 1
    if drift[-1] > surface.tol.energy_drift:
        k = int(np.argmax(drift > surface.tol.energy_drift))
        _check_drift(surface, drift[-1], length * k / n)
    t = np.linspace(0.0, length, n + 1)
    chart = unpad(surface, path[:, 0:3])
    g = Geodesic(
        surface=surface,
        start=p,
        theta=float(theta),
        length=float(length),
        step=length / n,
        t=t,
        points=canonical(surface, chart),
        tangents=unpad(surface, path[:, 3:6]),
        j=path[:, 6].copy(),
        dj=path[:, 7].copy(),
        drift=float(drift[-1]),
    )
    object.__setattr__(g, "_chart", chart)
    object.__setattr__(g, "_states", path)
    return g


@dataclass(frozen=True)
class EndState:
    point: np.ndarray
    tangent: np.ndarray
    j: float
    dj: float
    raw: np.ndarray


def end_state(surface, p, theta, length, h=None):
    """Endpoint data of exp_p(length v(theta)) without storing samples."""
    h = surface.h if h is None else h
    x0, e1, e2 = kernel_frame(surface, np.asarray(p, dtype=float))
    y0 = K.initial_state(x0, e1, e2, float(theta))
    if length == 0:
        y = y0
    else:
        y, drift = K.shoot_end(surface.code, surface.kparams, y0, float(length), float(h))
        _check_drift(surface, drift, length)
    return EndState(
        point=canonical(surface, unpad(surface, y[0:3])),
        tangent=unpad(surface, y[3:6]),
        j=float(y[6]),
        dj=float(y[7]),
        raw=y,
    )


def exp_map(surface, p, theta, length):
    """exp_p(length v(theta))."""
    return end_state(surface, p, theta, length).point


@dataclass(frozen=True)
class JacobiProfile:
    geodesic: Geodesic
    t: np.ndarray
    j: np.ndarray
    dj: np.ndarray
    first_zero: float | None


def _refine_zero(surface, y_start, t_start, dt, width):
    # bisection on j inside one RK4 step starting from y_start
    lo, hi = 0.0, dt
    j_lo = y_start[6]
    if j_lo == 0.0:
        return t_start
    for _ in range(200):
        if hi - lo <= width:
            break
        mid = 0.5 * (lo + hi)
        j_mid = K.substep(surface.code, surface.kparams, y_start, mid)[6]
        if j_mid == 0.0:
            return t_start + mid
        if (j_mid > 0) == (j_lo > 0):
            lo, j_lo = mid, j_mid
        else:
            hi = mid
    return t_start + 0.5 * (lo + hi)


def jacobi_profile(g):
    """Jacobi profile along ``g`` with the first zero refined by bisection."""
    states = g._states
    j = g.j
    first = None
    # the first step leaves j(0) = 0 with j' = 1, so sign changes are looked
    # for from the second sample on
    for k in range(len(j) - 1):
        a, b = j[k], j[k + 1]
        if k == 0:
            if b <= 0.0:
                first = (k,)
                break
            continue
        if b == 0.0 or (a > 0) != (b > 0):
            first = (k,)
            break
    zero = None
    if first is not None:
        k = first[0]
        if j[k + 1] == 0.0:
            zero = float(g.t[k + 1])
        else:
            zero = _refine_zero(g.surface, states[k], float(g.t[k]), g.step, g.surface.tol.jacobi_bisection)
    return JacobiProfile(geodesic=g, t=g.t, j=g.j, dj=g.dj, first_zero=zero)


def conjugate_time(surface, p, theta, t_max=None):
    """First conjugate time kappa along direction theta, or None up to t_max.

    ``None`` stands for "no conjugate point before the horizon".
    """
    t_max = surface.t_max if t_max is None else float(t_max)
    if not t_max > 0:
        raise DomainError("horizon must be positive")
    if surface.is_flat:
        return None
    x0, e1, e2 = kernel_frame(surface, as_point(surface, p))
    y0 = K.initial_state(x0, e1, e2, float(theta))
    k, dt, y, found = K.first_jacobi_zero(surface.code, surface.kparams, y0, t_max, float(surface.h))
    if not found:
        return None
    z = K.substep(surface.code, surface.kparams, y, dt)
    if z[6] == 0.0:
        return (k + 1) * dt
    return _refine_zero(surface, y, k * dt, dt, surface.tol.jacobi_bisection)
