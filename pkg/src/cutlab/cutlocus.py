"""Cut times, cut-locus atlases and the injectivity-radius decomposition.

The cut time of a ray is the first time another geodesic from p reaches the
ray point with equal length.  ``cut_time`` brackets it on the ray's sample
grid with the shortfall predicate ``d(p, exp(tv)) < t - cut_shortfall`` and
then follows the competing geodesic to the exact crossing
``t = L_competitor(t)``.  When no competitor appears before the first
conjugate time the ray minimizes up to it and sigma = kappa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from . import flat
from .connections import (
    TWO_PI,
    circ_diff,
    connect_points,
    find_loops,
    get_fan,
    newton,
    wrap_angle,
)
from .errors import CutlabError, InconsistencyError, NumericalError, PreconditionError
from .geodesic_engine import conjugate_time, end_state
from .manifold import as_point, canonical, unpad

GOLDEN = (math.sqrt(5) - 1) / 2


class Branch(NamedTuple):
    """Start angle and length of a geodesic reaching a ray point."""

    theta: float
    length: float


@dataclass(frozen=True)
class Classification:
    """Minimal geodesics from p to a cut point and their conjugacy flags."""

    angles: tuple
    lengths: tuple
    j_values: tuple
    conjugate: tuple
    essential: bool
    continuum: bool

    @property
    def count(self):
        return len(self.angles)


@dataclass(frozen=True)
class CutSample:
    """Atlas record for one direction."""

    theta: float
    sigma: float
    kappa: float | None
    point: np.ndarray
    count: int
    continuum: bool
    essential: bool
    j_sigma: float
    classification: Classification | None = None
    error: str | None = None
    competitor: tuple | None = None

    @property
    def ok(self):
        return self.error is None

    def row(self):
        pt = np.asarray(self.point, dtype=float).tolist()
        pt = pt + [0.0] * (3 - len(pt))
        return [
            self.theta,
            self.sigma,
            math.nan if self.kappa is None else self.kappa,
            *pt,
            self.count,
            int(self.essential),
        ]


CSV_COLUMNS = ["theta", "sigma", "kappa", "x", "y", "z", "count", "essential"]


class CutContext:
    """Per-base-point state shared by the cut-time searches."""

    def __init__(self, surface, p):
        self.surface = surface
        self.p = as_point(surface, p)
        self.fan = get_fan(surface, self.p)
        self.frame = (self.fan.x0, self.fan.e1, self.fan.e2)

    def kappa(self, theta, t_max=None):
        return conjugate_time(self.surface, self.p, theta, t_max)

    def competitor(self, theta, t, x, shortfall, thorough=False):
        """Shortest geodesic to x with length below t - shortfall, or None."""
        fan = self.fan
        tol = self.surface.tol
        best = None
        for th, L in fan.seeds(x, t + fan.dt, thorough=thorough):
            if abs(circ_diff(th, theta)) <= 1.5 * fan.dth and abs(L - t) <= 2 * fan.dt:
                continue
            s = newton(self.surface, self.frame, x, th, L, L_min=0.0, L_max=t + fan.dt)
            if s.residual < tol.member_residual and s.length < t - shortfall:
                if abs(circ_diff(s.theta, theta)) < tol.dedup_angle and abs(s.length - t) < tol.dedup_length:
                    continue
                if best is None or s.length < best.length:
                    best = s
        return best


def _ray(ctx, theta, upper):
    fan = ctx.fan
    surface = ctx.surface
    y0 = K.initial_state(*ctx.frame, float(theta))
    path, _ = K.shoot_path(surface.code, surface.kparams, y0, float(upper), float(surface.h), fan.stride)
    n = path.shape[0] - 1
    return path, upper / n


def _follow(ctx, theta, t, x, comp):
    """Re-solve a known competitor branch at the ray point x = ray(t)."""
    s = newton(ctx.surface, ctx.frame, x, comp.theta, comp.length, L_min=0.0, L_max=2 * t + 1.0)
    tol = ctx.surface.tol
    if s.residual >= tol.member_residual:
        return None
    if abs(circ_diff(s.theta, theta)) < tol.dedup_angle and abs(s.length - t) < tol.dedup_length:
        return None
    return s


def _crossing(ctx, theta, lo, hi, comp, start=None):
    """Solve t = L_comp(t) on [lo, hi] following the competitor branch.

    Starts at ``start`` (default ``hi``, where the competitor is strictly
    shorter than the ray).  Returns (t, competitor) or None when the branch
    cannot be followed.
    """
    t = hi if start is None else start
    for _ in range(60):
        st = end_state(ctx.surface, ctx.p, theta, t)
        s = _follow(ctx, theta, t, st.point, comp)
        if s is None:
            return None
        G = t - s.length
        if G > 0:
            hi = t
        else:
            lo = t
        if abs(G) < 1e-12 or hi - lo < 1e-13:
            return t, s
        Gp = 1.0 - float(np.dot(s.state[3:6], st.raw[3:6]))
        t_new = t - G / Gp if Gp > 1e-14 else 0.5 * (lo + hi)
        if not lo < t_new < hi:
            t_new = 0.5 * (lo + hi)
        comp = s
        t = t_new
    return None


def _predicate(ctx, theta, t, x, shortfall, comp=None):
    """Competitor shorter than t - shortfall at x = ray(t), or None.

    A known branch ``comp`` is tried first; the full seed scan only runs
    when it does not already settle the question.
    """
    if comp is not None:
        s = _follow(ctx, theta, t, x, comp)
        if s is not None and s.length < t - shortfall:
            return s
    return ctx.competitor(theta, t, x, shortfall)


def _bisect(ctx, theta, lo, hi, comp, shortfall, width):
    """Bisection on the shortfall predicate (fallback)."""
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        x = end_state(ctx.surface, ctx.p, theta, mid).point
        c = _predicate(ctx, theta, mid, x, shortfall, comp)
        if c is None:
            lo = mid
        else:
            hi, comp = mid, c
    return hi, comp


HINT_WINDOW = 0.03
TIE = 1e-9


def _cut(ctx, theta, kappa=..., hint=None):
    """(sigma, kappa, competitor shot or None).

    ``hint`` is an estimate of sigma (e.g. from a neighbouring direction)
    used to open a narrow bracket first.
    """
    surface = ctx.surface
    tol = surface.tol
    sf = tol.cut_shortfall
    theta = wrap_angle(float(theta))
    if kappa is ...:
        kappa = ctx.kappa(theta)
    cap = ctx.fan.length
    limit = min(kappa if kappa is not None else math.inf, surface.t_max)
    upper = min(limit, cap)

    def pred(t, comp=None):
        return _predicate(ctx, theta, t, end_state(surface, ctx.p, theta, t).point, sf, comp)

    lo, hi, comp = 0.0, None, None
    if hint is not None and math.isfinite(hint):
        t_hi = hint * (1 + HINT_WINDOW)
        if t_hi < upper:
            comp = pred(t_hi)
            if comp is None:
                lo = t_hi
            else:
                hi = t_hi
                t_lo = hint * (1 - HINT_WINDOW)
                c = pred(t_lo, comp)
                if c is None:
                    lo = t_lo
                else:
                    hi, comp = t_lo, c
    if hi is None:
        comp = pred(upper)
        if comp is None:
            # near cut-locus endpoints the competitor deficit grows only
            # quadratically, so sigma = upper needs a strict tie test
            x = end_state(surface, ctx.p, theta, upper).point
            comp = ctx.competitor(theta, upper, x, TIE, thorough=True)
        if comp is None:
            if upper < limit:
                raise NumericalError(
                    f"ray {theta:.6f} still minimizing at the fan length {cap:.4g}; raise the diameter estimate",
                    module="cutlocus",
                    sample=theta,
                )
            return upper, kappa, None
        hi = upper
    # bracket to about one fan sample
    width = ctx.fan.dt
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        c = pred(mid, comp)
        if c is None:
            lo = mid
        else:
            hi, comp = mid, c
    # lo only bounds deficits above the shortfall, not the crossing itself
    for _ in range(8):
        res = _crossing(ctx, theta, 0.0, hi, comp)
        if res is None:
            break
        t, comp = res
        probe = t - tol.cut_bisection
        if probe <= 0.0:
            return t, kappa, comp
        x = end_state(surface, ctx.p, theta, probe).point
        other = ctx.competitor(theta, probe, x, TIE)
        if other is None:
            return t, kappa, comp
        hi, comp = probe, other
    t, comp = _bisect(ctx, theta, lo, hi, comp, sf, tol.cut_bisection)
    return t, kappa, comp


def cut_near(ctx, theta, ref):
    """Cut time at theta by continuing the cut of a nearby sample.

    The competitor branch of ``ref`` (a CutSample) is followed to its
    crossing with the new ray; no global search is made, so this is only
    meant for refinement inside one atlas cell.  Falls back to the full
    search when the branch cannot be followed.
    """
    theta = wrap_angle(float(theta))
    # conjugate times beyond the fan cannot bound the crossing
    kappa = ctx.kappa(theta, min(ctx.surface.t_max, ctx.fan.length))
    if ref.competitor is None:
        return _cut(ctx, theta, kappa, hint=ref.sigma)
    surface = ctx.surface
    upper = min(kappa if kappa is not None else math.inf, surface.t_max, ctx.fan.length)
    comp = Branch(*ref.competitor)
    start = min(ref.sigma, upper)
    res = _crossing(ctx, theta, 0.0, upper, comp, start=start)
    if res is None:
        return _cut(ctx, theta, kappa, hint=ref.sigma)
    t, s = res
    if t >= upper - 1e-12:
        return upper, kappa, None
    return t, kappa, s


def cut_time(surface, p, theta, context=None):
    """Cut time sigma(v(theta)) of the ray from p.

    Never exceeds the first conjugate time; on the flat torus the exact
    Voronoi exit time is returned.
    """
    if surface.analytic:
        return flat.cut_time(*surface.params, float(theta))
    ctx = context or CutContext(surface, p)
    return _cut(ctx, theta)[0]


# classification ----------------------------------------------------------------


def _classify_flat(surface, p, x, d_px):
    a, b = surface.params
    w, L, th = flat.translates(a, b, np.asarray(x) - np.asarray(p), d_px + surface.tol.minimal_slack + 1e-9)
    keep = L <= d_px + surface.tol.minimal_slack
    if not np.any(keep):
        raise InconsistencyError(f"no minimal geodesic of length {d_px:g}", module="cutlocus", sample=np.asarray(x).tolist())
    angles = tuple(float(v) for v in th[keep])
    lengths = tuple(float(v) for v in L[keep])
    return Classification(angles, lengths, lengths, (False,) * len(angles), False, False)


def classify_cut_point(surface, p, x, d_px, seeds=()):
    """Minimal geodesics p -> x and whether x is an essential conjugate point.

    A minimal geodesic is flagged conjugate when |j(d_px)| < conjugacy_rel
    * d_px.  ``essential`` requires every enumerated minimal geodesic to be
    conjugate; in the continuum case all sampled representatives are
    checked.  ``seeds`` are known (theta, L) pairs reaching x, such as the
    ray itself and its competitor.
    """
    p = as_point(surface, p)
    x = as_point(surface, x)
    tol = surface.tol
    if surface.analytic:
        return _classify_flat(surface, p, x, d_px)
    cs = connect_points(surface, p, x, d_px + 2 * tol.minimal_slack, seeds=seeds)
    if not cs.members:
        raise InconsistencyError(
            f"no geodesic to the cut point within {d_px:g}", module="cutlocus", sample=x.tolist()
        )
    if cs.min_length < d_px - tol.minimal_slack:
        raise PreconditionError(f"cut point is at distance {cs.min_length:.6g}, not {d_px:.6g}")
    mins = [m for m in cs.members if m.length <= d_px + tol.minimal_slack]
    if not mins:
        raise InconsistencyError(
            f"no minimal geodesic of length {d_px:g} to the cut point", module="cutlocus", sample=x.tolist()
        )
    rel = tol.conjugacy_rel * d_px
    flags = tuple(abs(m.j_end) < rel for m in mins)
    return Classification(
        tuple(m.theta for m in mins),
        tuple(m.length for m in mins),
        tuple(m.j_end for m in mins),
        flags,
        bool(all(flags)),
        cs.continuum,
    )


def _sample(ctx, theta, kappa=..., hint=None):
    surface = ctx.surface
    sigma, kappa, comp = _cut(ctx, theta, kappa, hint)
    st = end_state(surface, ctx.p, theta, sigma)
    seeds = [(wrap_angle(theta), sigma)] + ([] if comp is None else [(comp.theta, comp.length)])
    cl = classify_cut_point(surface, ctx.p, st.point, sigma, seeds)
    return CutSample(
        theta=wrap_angle(theta),
        sigma=sigma,
        kappa=kappa,
        point=st.point,
        count=cl.count,
        continuum=cl.continuum,
        essential=cl.essential,
        j_sigma=st.j,
        classification=cl,
        competitor=None if comp is None else (comp.theta, comp.length),
    )


def _flat_sample(surface, p, theta):
    sigma = flat.cut_time(*surface.params, theta)
    x = canonical(surface, np.asarray(p) + sigma * np.array([math.cos(theta), math.sin(theta)]))
    cl = _classify_flat(surface, p, x, sigma)
    return CutSample(wrap_angle(theta), sigma, None, x, cl.count, False, False, sigma, cl)


def cut_sample(surface, p, theta, context=None):
    """Cut sample for one direction (raises on failure)."""
    p = as_point(surface, p)
    if surface.analytic:
        return _flat_sample(surface, p, float(theta))
    return _sample(context or CutContext(surface, p), float(theta))


def sample_cut_locus(surface, p, n_dirs=64, context=None):
    """Cut samples for theta_k = 2 pi k / n_dirs.

    Per-direction failures are stored in ``CutSample.error``.
    """
    if n_dirs < 64:
        raise PreconditionError("n_dirs must be at least 64")
    p = as_point(surface, p)
    ctx = None if surface.analytic else (context or CutContext(surface, p))
    out = []
    hint = None
    for k in range(n_dirs):
        theta = TWO_PI * k / n_dirs
        try:
            out.append(_flat_sample(surface, p, theta) if ctx is None else _sample(ctx, theta, hint=hint))
            hint = out[-1].sigma
        except CutlabError as exc:
            hint = None
            nan = np.full(surface.dim, np.nan)
            out.append(CutSample(theta, math.nan, None, nan, 0, False, False, math.nan, None, str(exc)))
    return out


# radii -------------------------------------------------------------------------


def golden_min(f, a, b, width):
    """Golden-section minimum of f on [a, b]; returns (x, f(x))."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > width:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def discrete_local_minima(values):
    """Indices of strict circular local minima; plateaus become one index."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    finite = np.isfinite(v)
    if not np.any(finite):
        return []
    if np.all(v[finite] == v[finite][0]) and np.all(finite):
        return [0]
    out = []
    k = 0
    seen = set()
    for i in range(n):
        if not finite[i] or i in seen:
            continue
        # extend plateau
        j = i
        while finite[(j + 1) % n] and v[(j + 1) % n] == v[i] and (j + 1) % n != i:
            j += 1
        left = v[(i - 1) % n]
        right = v[(j + 1) % n]
        block = [(i + q) % n for q in range(j - i + 1)]
        seen.update(block)
        if (not np.isfinite(left) or left > v[i]) and (not np.isfinite(right) or right > v[i]):
            out.append(block[len(block) // 2])
        k += 1
    return sorted(set(out))


@dataclass(frozen=True)
class RadiiReport:
    """Injectivity, conjugate and essential conjugate radii at one point."""

    p: np.ndarray
    injrad: float
    injrad_theta: float
    conj: float | None
    conj_theta: float | None
    conj_eps: float | None
    conj_eps_theta: float | None
    shortest_loop: float | None
    loop_theta: float | None
    loop_closed: bool | None
    residual: float
    relative_residual: float
    n_dirs: int
    L_max: float
    samples: list = field(repr=False, default_factory=list)

    def record(self):
        return {
            "p": np.asarray(self.p).tolist(),
            "injrad": self.injrad,
            "injrad_theta": self.injrad_theta,
            "conj": self.conj,
            "conj_theta": self.conj_theta,
            "conj_eps": self.conj_eps,
            "conj_eps_theta": self.conj_eps_theta,
            "shortest_loop": self.shortest_loop,
            "loop_theta": self.loop_theta,
            "loop_closed": self.loop_closed,
            "injrad_residual": self.residual,
            "relative_residual": self.relative_residual,
            "n_dirs": self.n_dirs,
            "L_max": self.L_max,
        }


def _promising(values, minima, rel=0.02):
    # local minima far above the sampled minimum cannot win after refinement
    lo = float(np.min(values))
    return [i for i in minima if values[i] <= lo + rel * abs(lo)]


def _refine(f, theta, dth, width):
    x, fx = golden_min(f, theta - dth, theta + dth, width)
    return wrap_angle(x), fx


def radii_report(surface, p, n_dirs=64, L_max=None, samples=None):
    """Sample C_p, refine the radii and compare with the shortest loop."""
    if n_dirs < 64:
        raise PreconditionError("n_dirs must be at least 64")
    p = as_point(surface, p)
    tol = surface.tol
    L_max = 2.5 * surface.diameter_estimate if L_max is None else float(L_max)
    if surface.analytic:
        return _flat_radii(surface, p, n_dirs, L_max)
    ctx = CutContext(surface, p)
    samples = samples if samples is not None else sample_cut_locus(surface, p, n_dirs, ctx)
    good = [s for s in samples if s.ok]
    if not good:
        raise NumericalError("every direction of the atlas failed", module="cutlocus")
    dth = TWO_PI / n_dirs
    width = tol.local_min_width
    sig = np.array([s.sigma if s.ok else np.inf for s in samples])
    kap = np.array([s.kappa if (s.ok and s.kappa is not None) else np.inf for s in samples])
    thetas = np.array([s.theta for s in samples])

    hint = [None]

    def sigma_of(th):
        try:
            v = _cut(ctx, th, hint=hint[0])[0]
        except CutlabError:
            return math.inf
        hint[0] = v
        return v

    # injrad: refine around every discrete local minimum of sigma
    injrad, injrad_theta = float(np.min(sig)), float(thetas[int(np.argmin(sig))])
    if np.ptp(sig[np.isfinite(sig)]) > width:
        for i in _promising(sig, discrete_local_minima(sig)):
            hint[0] = sig[i]
            th, v = _refine(sigma_of, thetas[i], dth, width)
            if v < injrad:
                injrad, injrad_theta = v, th

    conj = conj_theta = None
    if np.any(np.isfinite(kap)):
        conj, conj_theta = float(np.min(kap)), float(thetas[int(np.argmin(kap))])
        if np.ptp(kap[np.isfinite(kap)]) > width:
            for i in _promising(kap, discrete_local_minima(kap)):
                th, v = _refine(lambda t: ctx.kappa(t) or math.inf, thetas[i], dth, width)
                if v < conj:
                    conj, conj_theta = v, th

    conj_eps, conj_eps_theta = _essential_radius(ctx, samples, sig, kap, thetas, dth, width)

    loops = find_loops(surface, p, L_max)
    if loops.members:
        lp = loops.members[0]
        shortest, loop_theta, closed = lp.length, lp.theta, lp.closed
    else:
        shortest = loop_theta = closed = None
    return _report(p, injrad, injrad_theta, conj, conj_theta, conj_eps, conj_eps_theta, shortest, loop_theta, closed, n_dirs, L_max, samples)


def _essential_radius(ctx, samples, sig, kap, thetas, dth, width):
    """Nearest essential conjugate point from the atlas.

    Essential points on a surface atlas are the directions where the cut
    time reaches the conjugate time; the gap kappa - sigma is refined
    around its discrete minima and the refined point re-classified.
    """
    surface = ctx.surface
    tol = surface.tol
    best, best_theta = None, None
    for s in samples:
        if s.ok and s.essential and (best is None or s.sigma < best):
            best, best_theta = s.sigma, s.theta
    gap = kap - sig
    if not np.any(np.isfinite(gap)):
        return best, best_theta
    if np.ptp(gap[np.isfinite(gap)]) <= width:
        return best, best_theta

    hint = [None]

    def gap_of(th):
        try:
            s, k, _ = _cut(ctx, th, hint=hint[0])
        except CutlabError:
            return math.inf
        hint[0] = s
        return math.inf if k is None else k - s

    for i in discrete_local_minima(gap):
        if samples[i].essential:
            continue
        hint[0] = samples[i].sigma
        th, g = _refine(gap_of, thetas[i], dth, width)
        if g > tol.cut_locus_margin:
            continue
        try:
            s = _sample(ctx, th)
        except CutlabError:
            continue
        if s.essential and (best is None or s.sigma < best):
            best, best_theta = s.sigma, s.theta
    return best, best_theta


def _report(p, injrad, injrad_theta, conj, conj_theta, conj_eps, conj_eps_theta, shortest, loop_theta, closed, n_dirs, L_max, samples):
    terms = [v for v in (conj_eps, None if shortest is None else 0.5 * shortest) if v is not None]
    target = min(terms) if terms else math.inf
    residual = abs(injrad - target) if math.isfinite(target) else math.inf
    rel = residual / injrad if injrad > 0 else math.inf
    return RadiiReport(
        p=p,
        injrad=float(injrad),
        injrad_theta=float(injrad_theta),
        conj=conj,
        conj_theta=conj_theta,
        conj_eps=conj_eps,
        conj_eps_theta=conj_eps_theta,
        shortest_loop=shortest,
        loop_theta=loop_theta,
        loop_closed=closed,
        residual=float(residual),
        relative_residual=float(rel),
        n_dirs=n_dirs,
        L_max=L_max,
        samples=samples,
    )


def _flat_radii(surface, p, n_dirs, L_max):
    samples = sample_cut_locus(surface, p, n_dirs)
    sig = np.array([s.sigma for s in samples])
    # the shortest lattice vector gives the exact minimum of the exit time
    a, b = surface.params
    injrad = 0.5 * min(a, b)
    injrad_theta = 0.0 if a <= b else math.pi / 2
    injrad = min(injrad, float(np.min(sig)))
    loops = find_loops(surface, p, L_max)
    lp = loops.members[0] if loops.members else None
    return _report(
        p, injrad, injrad_theta, None, None, None, None,
        None if lp is None else lp.length, None if lp is None else lp.theta, None if lp is None else lp.closed,
        n_dirs, L_max, samples,
    )
