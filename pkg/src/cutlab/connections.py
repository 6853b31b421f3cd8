"""Two-point boundary value problems, distances, loops and lifts.

Connecting geodesics are found by multi-start shooting.  A fan of
``n_starts`` evenly spaced directions is integrated once per base point and
cached; its samples that pass close to the target seed a damped Newton
iteration on (theta, L) -> exp_a(L v(theta)) - b.  On the flat torus the
exact lattice enumeration is used unless the surface asks for the ODE
backend.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from . import flat
from .errors import DomainError, LiftObstruction, NoConnectionError
from .manifold import angle_between, as_point, canonical, kernel_frame, pad, unpad

TWO_PI = 2 * math.pi

# fan samples are spaced about diameter / FAN_RESOLUTION apart in arclength
FAN_RESOLUTION = 256
SEED_FACTOR = 2.0


def wrap_angle(a):
    """Angle in [0, 2 pi), snapping round-off just below 2 pi to 0."""
    a = a % TWO_PI
    return 0.0 if a > TWO_PI - 1e-12 else a


def circ_diff(a, b):
    """Signed angle a - b wrapped into [-pi, pi)."""
    return (a - b + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class Connection:
    """One connecting geodesic: initial angle, length and arrival data."""

    theta: float
    length: float
    residual: float
    arrival: np.ndarray
    j_end: float
    closed: bool = False

    def conjugate(self, rel):
        return abs(self.j_end) < rel * self.length

    def record(self):
        return {
            "theta": self.theta,
            "length": self.length,
            "residual": self.residual,
            "j_end": self.j_end,
            "closed": bool(self.closed),
        }


@dataclass(frozen=True)
class ConnectionSet:
    """Geodesics joining ``a`` to ``b`` with length at most ``L_max``.

    ``continuum`` is set when at least half of the start angles converge to
    geodesics of a common length, the numerical signature of a continuous
    family such as the meridians between antipodes.
    """

    a: np.ndarray
    b: np.ndarray
    L_max: float
    members: tuple
    dedup_angle: float
    dedup_length: float
    continuum: bool = False
    n_converged: int = 0

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def lengths(self):
        return np.array([m.length for m in self.members])

    @property
    def angles(self):
        return np.array([m.theta for m in self.members])

    @property
    def min_length(self):
        return self.members[0].length if self.members else math.inf

    def minimal(self, slack):
        """Members whose length is within ``slack`` of the shortest."""
        if not self.members:
            return ()
        L0 = self.members[0].length
        return tuple(m for m in self.members if m.length <= L0 + slack)

    def record(self):
        return {
            "a": np.asarray(self.a).tolist(),
            "b": np.asarray(self.b).tolist(),
            "L_max": self.L_max,
            "continuum": bool(self.continuum),
            "n_converged": int(self.n_converged),
            "members": [m.record() for m in self.members],
        }


# fans -------------------------------------------------------------------------


class Fan:
    """Geodesics from one base point in ``n`` evenly spaced directions.

    Positions and Jacobi values are stored every ``stride`` integrator
    steps, i.e. at arclength spacing ``dt``.
    """

    def __init__(self, surface, p, length, n):
        self.surface = surface
        self.p = np.asarray(p, dtype=float)
        self.n = int(n)
        self.x0, self.e1, self.e2 = kernel_frame(surface, self.p)
        h = surface.h
        self.stride = max(1, int(round(surface.diameter_estimate / FAN_RESOLUTION / h)))
        steps = K.n_steps(length, h, self.stride)
        self.dt = length * self.stride / steps
        self.length = float(length)
        self.dth = TWO_PI / self.n
        self.P, self.J = K.build_fan(surface.code, surface.kparams, self.x0, self.e1, self.e2, self.n, self.length, h, self.stride)
        self.m = self.P.shape[1] - 1
        # running max of |j| over all rays up to each sample time
        self.jcum = np.maximum.accumulate(np.max(np.abs(self.J), axis=0))

    @property
    def t(self):
        return np.arange(self.m + 1) * self.dt

    def distances(self, b, t_max=None):
        kmax = self.kmax(t_max)
        return K.fan_distances(self.surface.code, self.surface.kparams, self.P, pad(self.surface, b), kmax), kmax

    def kmax(self, t_max=None):
        if t_max is None:
            return self.m
        return int(min(self.m, math.ceil(t_max / self.dt - 1e-9) + 1))

    def seeds(self, b, t_max=None, t_min=0.0, thorough=False):
        """(angle, length) start values near the geodesics reaching b.

        ``thorough`` keeps every per-ray minimum instead of the grid local
        minima only.
        """
        D, kmax = self.distances(b, t_max)
        kmin = max(1, int(math.ceil(t_min / self.dt)))
        fn = K.ray_seeds if thorough else K.fan_seeds
        s = fn(D, self.J, self.dth, self.dt, kmin, kmax, SEED_FACTOR)
        return [(i * self.dth, k * self.dt) for i, k in s]


@functools.lru_cache(maxsize=128)
def _fan_cached(surface, key, length, n):
    return Fan(surface, np.array(key), length, n)


def get_fan(surface, p, length=None, n=None):
    """Cached fan from p covering at least ``length``."""
    n = surface.tol.n_starts if n is None else int(n)
    base = 1.5 * surface.diameter_estimate
    length = base if length is None or length <= base else float(length)
    return _fan_cached(surface, tuple(float(v) for v in np.asarray(p, dtype=float)), length, n)


def clear_cache():
    _fan_cached.cache_clear()


# newton -----------------------------------------------------------------------


@dataclass(frozen=True)
class _Shot:
    theta: float
    length: float
    residual: float
    status: int
    state: np.ndarray


COARSE_FACTOR = 8
COARSE_TOL = 1e-7


def _newton_at(surface, frame, b, theta, length, h, L_min, L_max, maxit, tol):
    x0, e1, e2 = frame
    return K.newton_shoot(
        surface.code,
        surface.kparams,
        x0,
        e1,
        e2,
        pad(surface, b),
        float(theta),
        float(length),
        float(h),
        int(maxit),
        float(tol),
        float(L_min),
        float(L_max),
    )


def newton(surface, frame, b, theta, length, L_min=0.0, L_max=math.inf, maxit=None, tol=None):
    """Newton solve of exp_p(L v(theta)) = b from a start value.

    Iterations run with a step ``COARSE_FACTOR`` times larger until the
    residual is below ``COARSE_TOL``; the result is then polished with the
    surface step, so only the last one or two shots are at full cost.
    """
    t = surface.tol
    maxit = t.newton_maxiter if maxit is None else maxit
    tol = t.newton_tol if tol is None else tol
    h = surface.h
    if not surface.is_flat:
        th, L, res, it, status, y = _newton_at(surface, frame, b, theta, length, COARSE_FACTOR * h, L_min, L_max, maxit, COARSE_TOL)
        if res > 1e3 * COARSE_TOL:
            return _Shot(wrap_angle(th), L, math.inf, status, y)
        theta, length, maxit = th, L, max(1, maxit - it)
    th, L, res, _, status, y = _newton_at(surface, frame, b, theta, length, h, L_min, L_max, maxit, tol)
    return _Shot(wrap_angle(th), L, res, status, y)


def _member(surface, shot, frame):
    arrival = unpad(surface, shot.state[3:6])
    start = unpad(surface, math.cos(shot.theta) * frame[1] + math.sin(shot.theta) * frame[2])
    closed = angle_between(arrival, start) < surface.tol.closure_angle
    return Connection(shot.theta, shot.length, shot.residual, arrival, float(shot.state[6]), bool(closed))


def _dedup(members, tol, reverse=False):
    members = sorted(members, key=lambda m: (m.length, m.theta))
    kept = []
    for m in members:
        dup = False
        for k in kept:
            if abs(m.length - k.length) >= tol.dedup_length:
                continue
            if abs(circ_diff(m.theta, k.theta)) < tol.dedup_angle:
                dup = True
            elif reverse and abs(circ_diff(m.theta, k.reverse_theta)) < tol.dedup_angle:
                dup = True
            if dup:
                break
        if not dup:
            kept.append(m)
    return kept


def _continuum_probe(surface, frame, b, L_star, n):
    """Newton from every start angle at length L_star; count common-length hits."""
    tol = surface.tol
    hits = []
    for i in range(n):
        s = newton(surface, frame, b, TWO_PI * i / n, L_star, L_min=0.5 * L_star, L_max=1.5 * L_star)
        if s.residual < tol.member_residual and abs(s.length - L_star) < tol.continuum_length:
            hits.append(s)
    distinct = []
    for s in sorted(hits, key=lambda s: s.theta):
        if not distinct or abs(circ_diff(s.theta, distinct[-1].theta)) >= tol.dedup_angle:
            distinct.append(s)
    if len(distinct) > 1 and abs(circ_diff(distinct[0].theta, distinct[-1].theta)) < tol.dedup_angle:
        distinct.pop()
    return distinct


def _collect(surface, a, b, L_max, n, t_min, probe, extra=()):
    tol = surface.tol
    fan = get_fan(surface, a, L_max, n)
    frame = (fan.x0, fan.e1, fan.e2)
    L_cap = L_max + 1e-9
    shots = []
    for th, L in list(extra) + fan.seeds(b, L_max + fan.dt, t_min):
        s = newton(surface, frame, b, th, L, L_min=0.5 * t_min, L_max=L_cap + fan.dt)
        if s.residual < tol.member_residual and s.length <= L_cap:
            shots.append(s)
    members = [_member(surface, s, frame) for s in shots]
    continuum = False
    if probe:
        members = _dedup(members, tol)
        for m in members:
            if m.conjugate(tol.conjugacy_rel):
                distinct = _continuum_probe(surface, frame, b, m.length, n)
                if len(distinct) >= n / 2:
                    continuum = True
                    members.extend(_member(surface, s, frame) for s in distinct)
                    break
    return members, continuum, len(shots), frame


def _flat_set(surface, a, b, L_max, loops=False):
    A, B = surface.params
    w, L, th = (flat.lattice_loops(A, B, L_max) if loops else flat.translates(A, B, np.asarray(b) - np.asarray(a), L_max))
    members = []
    for wk, Lk, tk in zip(w, L, th):
        u = wk / Lk
        members.append(Connection(float(tk), float(Lk), 0.0, u, float(Lk), True))
    tol = surface.tol
    return ConnectionSet(np.asarray(a), np.asarray(b), float(L_max), tuple(members), tol.dedup_angle, tol.dedup_length, False, len(members))


def connect_points(surface, a, b, L_max, n_starts=None, probe=True, seeds=()):
    """All geodesics from a to b with length at most L_max.

    Parameters
    ----------
    surface : SurfaceSpec
    a, b : array_like
        Distinct surface points.
    L_max : float
        Length budget.
    n_starts : int, optional
        Number of fan directions (default ``tol.n_starts``, at least 8).
    probe : bool
        Run the continuum probe when a member is conjugate.
    seeds : sequence of (theta, L), optional
        Extra Newton start values tried before the fan seeds.

    Returns
    -------
    ConnectionSet
        Members sorted by (length, angle).

    Raises
    ------
    NoConnectionError
        Nothing converged although ``L_max`` is at least twice the
        diameter estimate.
    """
    a = as_point(surface, a)
    b = as_point(surface, b)
    n = surface.tol.n_starts if n_starts is None else int(n_starts)
    if n < 8:
        raise DomainError("n_starts must be at least 8")
    if not L_max > 0:
        raise DomainError("L_max must be positive")
    if surface.is_flat:
        gap = flat.distance(*surface.params, a, b)
    else:
        gap = float(np.linalg.norm(a - b))
    if gap < 1e-12:
        raise DomainError("connect_points needs distinct endpoints; use find_loops for a = b")
    if surface.analytic:
        return _flat_set(surface, a, b, L_max)
    members, continuum, n_conv, _ = _collect(surface, a, b, L_max, n, 0.0, probe, seeds)
    members = _dedup(members, surface.tol)
    if not members and L_max >= 2 * surface.diameter_estimate:
        raise NoConnectionError(
            f"no geodesic from {a.tolist()} to {b.tolist()} converged within L_max={L_max:g}",
            module="connections",
            sample=b.tolist(),
        )
    tol = surface.tol
    return ConnectionSet(a, b, float(L_max), tuple(members), tol.dedup_angle, tol.dedup_length, continuum, n_conv)


def distance(surface, a, b):
    """Riemannian distance d(a, b).

    Exact lattice minimum on the flat torus; otherwise the shortest
    connecting geodesic with budget 1.5 diameter estimates.
    """
    if surface.analytic:
        return flat.distance(*surface.params, as_point(surface, a), as_point(surface, b))
    a = as_point(surface, a)
    b = as_point(surface, b)
    if surface.is_flat:
        if flat.distance(*surface.params, a, b) < 1e-12:
            return 0.0
    elif np.linalg.norm(a - b) < 1e-12:
        return 0.0
    s = _shortest(surface, a, b, 1.5 * surface.diameter_estimate)
    if s is None:
        raise NoConnectionError(f"distance oracle found no geodesic to {b.tolist()}", module="connections", sample=b.tolist())
    return s.length


def _shortest(surface, a, b, L_max, n=None):
    """Shortest converged geodesic a -> b, trying seeds in length order.

    A seed cannot belong to a geodesic much shorter than its own sample
    time: the capture radius 2 (|j| dth + dt) bounds the gap, so seeds
    beyond the best length plus that radius are skipped.
    """
    tol = surface.tol
    fan = get_fan(surface, a, L_max, n)
    frame = (fan.x0, fan.e1, fan.e2)
    best = None
    for th, L in sorted(fan.seeds(b, L_max + fan.dt), key=lambda v: (v[1], v[0])):
        if best is not None:
            k = min(fan.m, int(L / fan.dt) + 1)
            if L > best.length + SEED_FACTOR * (fan.jcum[k] * fan.dth + fan.dt):
                break
        sh = newton(surface, frame, b, th, L, L_max=L_max + fan.dt)
        if sh.residual < tol.member_residual and sh.length <= L_max + 1e-9:
            if best is None or sh.length < best.length:
                best = sh
    return best


def nearest(surface, a, b):
    """Shortest connecting geodesic (as a Connection), or None when a = b."""
    a = as_point(surface, a)
    b = as_point(surface, b)
    if surface.analytic:
        d = flat.distance(*surface.params, a, b)
        return _flat_set(surface, a, b, d + 1e-12).members[0] if d > 0 else None
    if step_len_origin(surface, a, b) < 1e-12:
        return None
    frame = kernel_frame(surface, a)
    s = _shortest(surface, a, b, 1.5 * surface.diameter_estimate)
    return None if s is None else _member(surface, s, frame)


# loops --------------------------------------------------------------------------


@dataclass(frozen=True)
class Loop(Connection):
    reverse_theta: float = 0.0


def find_loops(surface, p, L_max, n_starts=None):
    """Geodesic loops at p of length in (0, L_max].

    A loop and its reversal count once.  ``closed`` marks loops whose
    return tangent matches the initial tangent within ``tol.closure_angle``.
    """
    p = as_point(surface, p)
    if not L_max > 0:
        raise DomainError("L_max must be positive")
    tol = surface.tol
    n = tol.n_starts if n_starts is None else int(n_starts)
    if surface.analytic:
        return _flat_set(surface, p, p, L_max, loops=True)
    fan = get_fan(surface, p, L_max, n)
    t_min = 4 * fan.dt
    members, continuum, n_conv, frame = _collect(surface, p, p, L_max, n, t_min, True)
    loops = []
    for m in members:
        rev = _angle_in_frame(surface, frame, -pad(surface, m.arrival))
        loops.append(Loop(m.theta, m.length, m.residual, m.arrival, m.j_end, m.closed, rev))
    loops = [_canonical_loop(surface, frame, m) for m in _dedup(loops, tol, reverse=True)]
    loops.sort(key=lambda m: (m.length, m.theta))
    return ConnectionSet(p, p, float(L_max), tuple(loops), tol.dedup_angle, tol.dedup_length, continuum, n_conv)


def _canonical_loop(surface, frame, m):
    # report each loop in the orientation with the smaller start angle
    if m.reverse_theta >= m.theta:
        return m
    _, e1, e2 = frame
    arrival = -unpad(surface, math.cos(m.theta) * e1 + math.sin(m.theta) * e2)
    return Loop(m.reverse_theta, m.length, m.residual, arrival, m.j_end, m.closed, m.theta)


def _angle_in_frame(surface, frame, v):
    _, e1, e2 = frame
    return wrap_angle(math.atan2(float(np.dot(v, e2)), float(np.dot(v, e1))))


# lifting ------------------------------------------------------------------------


@dataclass(frozen=True)
class LiftedCurve:
    """A surface curve pulled back to T_pM in polar form (s, theta)."""

    base: np.ndarray
    curve: np.ndarray
    s: np.ndarray
    theta: np.ndarray
    residuals: np.ndarray

    @property
    def vectors(self):
        return np.column_stack([self.s * np.cos(self.theta), self.s * np.sin(self.theta)])

    @property
    def end(self):
        return float(self.s[-1]), float(self.theta[-1]) % TWO_PI

    def record(self):
        return {
            "base": np.asarray(self.base).tolist(),
            "s": self.s.tolist(),
            "theta": self.theta.tolist(),
            "max_residual": float(np.max(self.residuals)),
        }


def _lift_flat(surface, p, curve):
    a, b = surface.params
    v = [flat.reduce(curve[0] - p, a, b)]
    for k in range(1, len(curve)):
        v.append(v[-1] + flat.reduce(curve[k] - curve[k - 1], a, b))
    v = np.array(v)
    s = np.hypot(v[:, 0], v[:, 1])
    th = np.arctan2(v[:, 1], v[:, 0])
    res = np.array([flat.distance(a, b, canonical(surface, p + vk), ck) for vk, ck in zip(v, curve)])
    return LiftedCurve(p, curve, s, th, res)


def lift_curve(surface, p, curve):
    """Continuation lift of a curve into T_pM.

    Each sample is solved by Newton seeded with the previous lift.  The
    first sample is seeded by the shortest connecting geodesic, so it must
    lie in the open segment domain.  The last sample may sit on the
    tangential cut locus.

    Raises
    ------
    LiftObstruction
        Newton fails at a sample, or the lift jumps by more than ten times
        the step of the curve.
    """
    p = as_point(surface, p)
    curve = np.array([as_point(surface, c) for c in np.asarray(curve, dtype=float)])
    if len(curve) == 0:
        raise DomainError("empty curve")
    if surface.analytic:
        return _lift_flat(surface, p, curve)
    tol = surface.tol
    frame = kernel_frame(surface, p)
    n = len(curve)
    s = np.zeros(n)
    th = np.zeros(n)
    res = np.zeros(n)
    def vec(si, ti):
        return np.array([si * math.cos(ti), si * math.sin(ti)])

    def step_len(k):
        if surface.is_flat:
            return flat.distance(*surface.params, curve[k], curve[k - 1])
        return float(np.linalg.norm(curve[k] - curve[k - 1]))

    start = 0
    while start < n and step_len_origin(surface, p, curve[start]) < 1e-12:
        s[start], res[start] = 0.0, 0.0
        start += 1
    for k in range(start, n):
        if k == start:
            c = nearest(surface, p, curve[k])
            if c is None:
                raise LiftObstruction("no geodesic to the first curve sample", k)
            seed = (c.theta, c.length)
        else:
            if k >= start + 2:
                # linear extrapolation in T_pM
                w = 2 * vec(s[k - 1], th[k - 1]) - vec(s[k - 2], th[k - 2])
                seed = (math.atan2(w[1], w[0]), max(math.hypot(w[0], w[1]), 1e-9))
            else:
                seed = (th[k - 1], s[k - 1])
        shot = newton(surface, frame, curve[k], seed[0], seed[1], L_min=0.0, L_max=surface.t_max)
        ok = shot.residual < tol.member_residual or (k == n - 1 and shot.residual < 1e-5)
        if not ok and k > start:
            # retry from the unextrapolated previous lift
            shot = newton(surface, frame, curve[k], th[k - 1], s[k - 1], L_min=0.0, L_max=surface.t_max)
            ok = shot.residual < tol.member_residual or (k == n - 1 and shot.residual < 1e-5)
        if not ok:
            raise LiftObstruction(f"lift Newton failed at sample {k} (residual {shot.residual:.2e})", k)
        s[k] = shot.length
        th[k] = shot.theta
        if k > start:
            th[k] = th[k - 1] + circ_diff(th[k], th[k - 1])
            jump = float(np.linalg.norm(vec(s[k], th[k]) - vec(s[k - 1], th[k - 1])))
            if k < n - 1 and jump > 10 * step_len(k) + 1e-9:
                raise LiftObstruction(f"lift jumps at sample {k} ({jump:.3e})", k)
        res[k] = shot.residual
    if start > 0 and start < n:
        th[:start] = th[start]
    return LiftedCurve(p, curve, s, th, res)


def step_len_origin(surface, p, x):
    if surface.is_flat:
        return flat.distance(*surface.params, p, x)
    return float(np.linalg.norm(np.asarray(x) - p))
