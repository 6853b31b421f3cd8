"""F_{p;q} on the cut locus and the Klingenberg-type dichotomy checks.

For base points p, q the function F(x) = d(p, x) + d(q, x) is sampled on the
cut-locus atlas of p, where d(p, x) is the cut time.  At each refined local
minimum x0 the verdict records whether p and x0 are conjugate along every
minimal geodesic, and whether some minimal geodesic from p and some minimal
geodesic from q meet at x0 with opposite tangents, so that together they
form one geodesic from p to q through x0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import flat
from .connections import (
    TWO_PI,
    circ_diff,
    connect_points,
    distance,
    find_loops,
    get_fan,
    lift_curve,
    nearest,
    newton,
    wrap_angle,
    _shortest,
)
from .cutlocus import (
    CutContext,
    _cut,
    classify_cut_point,
    cut_near,
    discrete_local_minima,
    golden_min,
    sample_cut_locus,
)
from .errors import CutlabError, LiftObstruction, PreconditionError
from .geodesic_engine import end_state, shoot
from .manifold import angle_between, as_point, canonical, grid, kernel_frame, unit_normal, unpad

CAVEAT = (
    "minimal geodesics are enumerated by multi-start shooting; counts and the "
    "essential flag rely on heuristic completeness up to the deduplication tolerance"
)


def _same_point(surface, a, b):
    if surface.is_flat:
        return flat.distance(*surface.params, a, b)
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


def _chord(surface, a, b):
    """Cheap lower bound of d(a, b)."""
    return _same_point(surface, a, b)


# F atlas ----------------------------------------------------------------------


@dataclass(frozen=True)
class FMin:
    """A refined local minimum of F on the atlas."""

    theta: float
    sigma: float
    point: np.ndarray
    F: float
    d_qx: float
    index: int
    competitor: tuple | None = None

    def record(self):
        return {
            "theta": self.theta,
            "sigma": self.sigma,
            "point": np.asarray(self.point).tolist(),
            "F": self.F,
            "d_qx": self.d_qx,
            "index": self.index,
        }


@dataclass(frozen=True)
class FAtlas:
    """F_{p;q} sampled on the cut-locus atlas of p."""

    surface: object
    p: np.ndarray
    q: np.ndarray
    samples: tuple
    F: np.ndarray
    d_pq: float
    local_min_indices: tuple
    minima: tuple
    context: object = field(default=None, repr=False, compare=False)

    @property
    def global_min(self):
        return self.minima[0]

    @property
    def thetas(self):
        return np.array([s.theta for s in self.samples])

    def rows(self):
        flags = set(self.local_min_indices)
        return [[s.theta, s.sigma, self.F[k], int(k in flags)] for k, s in enumerate(self.samples)]

    def record(self):
        return {
            "p": np.asarray(self.p).tolist(),
            "q": np.asarray(self.q).tolist(),
            "d_pq": self.d_pq,
            "n_dirs": len(self.samples),
            "local_min_indices": list(self.local_min_indices),
            "minima": [m.record() for m in self.minima],
        }


F_COLUMNS = ["theta", "sigma", "F", "local_min"]
TRACK_WIDTH = 0.02


def check_not_cut_point(surface, p, q, context=None):
    """Raise PreconditionError when q lies on or within margin of C_p."""
    tol = surface.tol
    if _same_point(surface, p, q) < 1e-12:
        return 0.0
    c = nearest(surface, p, q)
    if surface.analytic:
        sigma = flat.cut_time(*surface.params, c.theta)
    else:
        ctx = context or CutContext(surface, p)
        sigma = _cut(ctx, c.theta)[0]
    if c.length > sigma - tol.cut_locus_margin:
        raise PreconditionError(
            f"hypothesis q not in C_p fails: d(p,q) = {c.length:.6g} is within "
            f"{tol.cut_locus_margin:g} of the cut time {sigma:.6g}"
        )
    return c.length


def _F_eval(surface, ctx, q, same, theta, ref, track=None):
    """(F, sigma, point, d_qx, competitor) at a direction near sample ref.

    ``track`` follows the geodesic from q instead of a global search.
    """
    if surface.analytic:
        sigma = flat.cut_time(*surface.params, theta)
        comp = None
    else:
        sigma, _, comp = cut_near(ctx, theta, ref)
        comp = None if comp is None else (comp.theta, comp.length)
    x = _cut_point(surface, ctx, theta, sigma)
    if same:
        d = sigma
    elif track is not None:
        d = track(x)[0]
    else:
        d = distance(surface, q, x)
    return sigma + d, sigma, x, d, comp


def _cut_point(surface, ctx, theta, sigma):
    if surface.analytic:
        p = ctx
        return canonical(surface, np.asarray(p) + sigma * np.array([math.cos(theta), math.sin(theta)]))
    return end_state(surface, ctx.p, theta, sigma).point


def f_min_on_cutlocus(surface, p, q, n_dirs=64, samples=None, context=None, prune=False, refine=True):
    """Sample F_{p;q} on the atlas of p and refine its local minima.

    Parameters
    ----------
    samples : list of CutSample, optional
        Precomputed atlas of p (reused across many q).
    prune : bool
        Only locate the global minimum: exact distances are skipped for
        samples whose chord lower bound already exceeds the best value.
    refine : bool
        Golden-section refinement of each discrete minimum to angular width
        ``tol.local_min_width``.

    Raises
    ------
    PreconditionError
        q is on C_p or within ``tol.cut_locus_margin`` of it.
    """
    p = as_point(surface, p)
    q = as_point(surface, q)
    tol = surface.tol
    ctx = None if surface.analytic else (context or CutContext(surface, p))
    same = _same_point(surface, p, q) < 1e-12
    d_pq = check_not_cut_point(surface, p, q, ctx)
    if samples is None:
        samples = sample_cut_locus(surface, p, n_dirs, ctx)
    n = len(samples)
    sig = np.array([s.sigma if s.ok else np.inf for s in samples])
    F = np.full(n, np.inf)
    if same:
        F = 2 * sig
    elif prune:
        lb = np.array([s.sigma + _chord(surface, q, s.point) if s.ok else np.inf for s in samples])
        best = np.inf
        for k in np.argsort(lb, kind="stable"):
            if lb[k] >= best:
                break
            F[k] = sig[k] + distance(surface, q, samples[k].point)
            best = min(best, F[k])
    else:
        for k, s in enumerate(samples):
            if s.ok:
                F[k] = s.sigma + distance(surface, q, s.point)
    if not np.any(np.isfinite(F)):
        raise PreconditionError("no usable atlas samples")
    if prune:
        # only the global candidate and its neighbours matter
        k0 = int(np.argmin(F))
        for k in ((k0 - 1) % n, (k0 + 1) % n):
            if not np.isfinite(F[k]) and samples[k].ok:
                F[k] = sig[k] + distance(surface, q, samples[k].point)
        idx = [k0] if F[k0] < F[(k0 - 1) % n] and F[k0] < F[(k0 + 1) % n] or np.ptp(F[np.isfinite(F)]) == 0 else discrete_local_minima(F)[:1]
        idx = idx or [k0]
    else:
        idx = discrete_local_minima(F)
    dth = TWO_PI / n
    minima = []
    flat_F = np.ptp(F[np.isfinite(F)]) <= 1e-9 * max(1.0, float(np.min(F)))
    ref_ctx = p if surface.analytic else ctx
    for i in idx:
        s = samples[i]
        if not s.ok:
            continue
        d_i = F[i] - s.sigma
        best = FMin(s.theta, s.sigma, s.point, float(F[i]), float(d_i), i, s.competitor)
        if refine and not flat_F:
            cache = {}

            def f(th, s=s, track=None):
                v = _F_eval(surface, ref_ctx, q, same, th, s, track)
                cache[th] = v
                return v[0]

            # global distances while the bracket is wide, then the q-geodesic
            # is followed inside the final cell
            th, _ = golden_min(f, s.theta - dth, s.theta + dth, TRACK_WIDTH)
            track = None if same else _GammaTracker(surface, q)
            th, _ = golden_min(lambda t: f(t, track=track), th - TRACK_WIDTH, th + TRACK_WIDTH, tol.local_min_width)
            Fv, sv, xv, dv, cv = cache[th]
            if not same:
                # the tracked branch may have stopped being the shortest
                dv = min(dv, distance(surface, q, xv))
                Fv = sv + dv
            if Fv < best.F:
                best = FMin(wrap_angle(th), sv, xv, Fv, dv, i, cv)
            if not same:
                best = _polish(surface, ref_ctx, q, best, s, dth)
        minima.append(best)
    minima = _merge_minima(surface, minima)
    return FAtlas(surface, p, q, tuple(samples), F, float(d_pq), tuple(idx), tuple(minima), ctx)


def _signed_angle(surface, x, u, v):
    """Signed angle from u to v in the tangent plane at x."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if surface.is_flat:
        c = u[0] * v[1] - u[1] * v[0]
    else:
        c = float(np.dot(unit_normal(surface, x), np.cross(u, v)))
    return math.atan2(c, float(np.dot(u, v)))


class _GammaTracker:
    """Shortest geodesic from q to a moving point, followed by Newton."""

    def __init__(self, surface, q):
        self.surface = surface
        self.q = q
        self.gamma = None
        if not surface.analytic:
            self.frame = kernel_frame(surface, q)

    def __call__(self, x):
        surface = self.surface
        if surface.analytic:
            A, B = surface.params
            w, L, th = flat.translates(A, B, np.asarray(x) - np.asarray(self.q), flat.distance(A, B, self.q, x) + 1e-9)
            return float(L[0]), w[0] / L[0]
        x = np.asarray(x, dtype=float)
        if self.gamma is not None:
            s = newton(surface, self.frame, x, self.gamma[0], self.gamma[1], L_max=2 * surface.diameter_estimate)
            # a branch of d(q, .) is 1-Lipschitz up to the chord/arc ratio
            jump = 2 * float(np.linalg.norm(x - self.x)) + 1e-6
            if s.residual < surface.tol.member_residual and abs(s.length - self.gamma[1]) <= jump:
                self.gamma, self.x = (s.theta, s.length), x
                return s.length, unpad(surface, s.state[3:6])
        c = nearest(surface, self.q, x)
        self.gamma, self.x = (c.theta, c.length), x
        return c.length, c.arrival


class _Stationarity:
    """Opposition defects at the cut point in direction theta.

    For every minimal geodesic alpha from p to x(theta) the defect is the
    signed angle between alpha'(end) and -gamma'(end) for the shortest
    gamma from q.  A local minimum of F where alpha and gamma form one
    geodesic is a zero of the corresponding defect.
    """

    def __init__(self, surface, ctx, q, ref):
        self.surface = surface
        self.ctx = ctx
        self.q = q
        self.ref = ref
        self._gamma = _GammaTracker(surface, q)

    def _alphas(self, theta, sigma, x, comp):
        surface = self.surface
        if surface.analytic:
            A, B = surface.params
            w, L, th = flat.translates(A, B, np.asarray(x) - np.asarray(self.ctx), sigma + 1e-9)
            return [(float(t), wk / l) for t, l, wk in zip(th, L, w) if l <= sigma + 1e-9]
        out = [(theta, end_state(surface, self.ctx.p, theta, sigma).tangent)]
        if comp is not None:
            out.append((comp.theta, unpad(surface, comp.state[3:6])))
        return out

    def __call__(self, theta):
        surface = self.surface
        if surface.analytic:
            sigma, comp = flat.cut_time(*surface.params, theta), None
        else:
            sigma, _, comp = cut_near(self.ctx, theta, self.ref)
        x = _cut_point(surface, self.ctx, theta, sigma)
        d, g_arr = self._gamma(x)
        defects = [(th, _signed_angle(surface, x, arr, -np.asarray(g_arr))) for th, arr in self._alphas(theta, sigma, x, comp)]
        return sigma + d, sigma, x, d, comp, defects


def _nearest_defect(defects, theta_alpha):
    return min(defects, key=lambda t: abs(circ_diff(t[0], theta_alpha)))


def _polish(surface, ctx, q, m, ref, dth):
    """Move a refined minimum onto the zero of its opposition defect.

    Golden refinement leaves x0 about tol.local_min_width away from the
    minimum, which the confirmation shot through x0 amplifies by d(q, x0).
    When some alpha is nearly opposite to gamma the defect is solved to
    zero by the secant method; the result is kept only if F does not grow.
    """
    stat = _Stationarity(surface, ctx, q, ref)
    F0, _, _, _, _, defects = stat(m.theta)
    th_a, g0 = min(defects, key=lambda t: abs(t[1]))
    if abs(g0) > POLISH_WINDOW:
        return m
    t0, t1 = m.theta, m.theta + 1e-5
    best = None
    for _ in range(30):
        F1, s1, x1, d1, c1, defects = stat(t1)
        th_a, g1 = _nearest_defect(defects, th_a)
        if abs(g1) < 1e-11:
            best = (t1, F1, s1, x1, d1, c1)
            break
        if g1 == g0:
            break
        t2 = t1 - g1 * (t1 - t0) / (g1 - g0)
        if abs(circ_diff(t2, m.theta)) > dth:
            break
        t0, g0, t1 = t1, g1, t2
        if abs(t1 - t0) < 1e-13:
            best = (t1, F1, s1, x1, d1, c1)
            break
    if best is None or best[1] > m.F + surface.tol.cut_shortfall:
        return m
    t, Fv, sv, xv, dv, cv = best
    cv = None if cv is None else (cv.theta, cv.length)
    return FMin(wrap_angle(t), sv, xv, Fv, dv, m.index, cv)


POLISH_WINDOW = 0.05


def _merge_minima(surface, minima):
    # the same cut point is reached from several directions
    out = []
    for m in sorted(minima, key=lambda m: (m.F, m.theta)):
        if any(_same_point(surface, m.point, k.point) < 1e-4 * max(1.0, m.sigma) for k in out):
            continue
        out.append(m)
    return out


# verdicts ---------------------------------------------------------------------


@dataclass(frozen=True)
class PairTest:
    alpha: int
    gamma: int
    angle_residual: float
    through: bool
    landing: float

    def record(self):
        return dict(alpha=self.alpha, gamma=self.gamma, angle_residual=self.angle_residual, through=self.through, landing=self.landing)


@dataclass(frozen=True)
class LiftCheck:
    """Endpoint of the lift of gamma compared with d(p, x0) alpha'(0)."""

    alpha: int
    gamma: int
    start_fraction: float
    radius: float
    angle: float
    radius_error: float
    angle_error: float
    passed: bool
    error: str | None = None

    def record(self):
        return dict(
            alpha=self.alpha,
            gamma=self.gamma,
            start_fraction=self.start_fraction,
            radius=self.radius,
            angle=self.angle,
            radius_error=self.radius_error,
            angle_error=self.angle_error,
            passed=self.passed,
            error=self.error,
        )


@dataclass(frozen=True)
class DichotomyVerdict:
    """Outcome of the dichotomy check at one local minimum x0."""

    p: np.ndarray
    q: np.ndarray
    x0: np.ndarray
    F: float
    d_px: float
    d_qx: float
    branch_conjugate: bool
    branch_through: bool
    through_count: int
    alpha_angles: tuple
    alpha_conjugate: tuple
    gamma_angles: tuple
    continuum: bool
    pairs: tuple
    smoothness_residuals: tuple
    lifts: tuple
    local_min_verified: bool
    caveat: str = CAVEAT

    @property
    def holds(self):
        return self.branch_conjugate or self.branch_through

    @property
    def broken_pairs(self):
        return [t for t in self.pairs if not t.through]

    def record(self):
        return {
            "p": np.asarray(self.p).tolist(),
            "q": np.asarray(self.q).tolist(),
            "x0": np.asarray(self.x0).tolist(),
            "F": self.F,
            "d_px": self.d_px,
            "d_qx": self.d_qx,
            "branch_conjugate": bool(self.branch_conjugate),
            "branch_through": bool(self.branch_through),
            "holds": bool(self.holds),
            "through_count": int(self.through_count),
            "alpha_angles": list(self.alpha_angles),
            "alpha_conjugate": [bool(v) for v in self.alpha_conjugate],
            "gamma_angles": list(self.gamma_angles),
            "continuum": bool(self.continuum),
            "pairs": [t.record() for t in self.pairs],
            "smoothness_residuals": list(self.smoothness_residuals),
            "lifts": [c.record() for c in self.lifts],
            "local_min_verified": bool(self.local_min_verified),
            "caveat": self.caveat,
        }


def _minimal_from(surface, a, x, d):
    """Minimal geodesics a -> x as (angles, lengths, arrival tangents, j)."""
    tol = surface.tol
    cs = connect_points(surface, a, x, d + 2 * tol.minimal_slack)
    mins = [m for m in cs.members if m.length <= d + tol.minimal_slack]
    return mins, cs.continuum


def _verify_local_min(surface, ctx, p, q, same, alpha_angles, F0, continuum):
    """F at directions just beside every minimal direction is not below F0."""
    tol = surface.tol
    delta = 0.02
    angles = alpha_angles
    if continuum:
        angles = alpha_angles[:: max(1, len(alpha_angles) // 4)]
    ref_ctx = p if surface.analytic else ctx
    worst = math.inf
    for th in angles:
        for sgn in (-1.0, 1.0):
            t = wrap_angle(th + sgn * delta)
            if surface.analytic:
                sigma = flat.cut_time(*surface.params, t)
            else:
                sigma = _cut(ctx, t)[0]
            x = _cut_point(surface, ref_ctx, t, sigma)
            Fv = sigma + (sigma if same else distance(surface, q, x))
            worst = min(worst, Fv - F0)
    return worst >= -tol.cut_shortfall, worst


def _gamma_curve(surface, q, gamma, n, start_fraction):
    g = shoot(surface, q, gamma.theta, gamma.length)
    t = np.linspace(start_fraction * gamma.length, gamma.length, n + 1)
    idx = np.clip(np.round(t / g.step).astype(int), 0, len(g.t) - 1)
    return g.points[idx]


def _lift_check(surface, p, q, alpha, gamma, ia, ig, d_px, start_fraction, n=48):
    tol = surface.tol
    try:
        curve = _gamma_curve(surface, q, gamma, n, start_fraction)
        lc = lift_curve(surface, p, curve)
    except (LiftObstruction, CutlabError) as exc:
        return LiftCheck(ia, ig, start_fraction, math.nan, math.nan, math.inf, math.inf, False, str(exc))
    s_end, th_end = lc.end
    r_err = abs(s_end - d_px)
    a_err = abs(circ_diff(th_end, alpha.theta))
    ok = r_err < tol.landing and a_err < tol.closure_angle
    return LiftCheck(ia, ig, start_fraction, s_end, th_end, r_err, a_err, bool(ok))


def dichotomy_verdict(surface, p, q, x0, d_px=None, check_local_min=True, lifts=True, global_min=True, context=None):
    """Dichotomy verdict at a refined local minimum x0 of F_{p;q}.

    Parameters
    ----------
    d_px : float, optional
        d(p, x0) if known (the refined cut time).
    check_local_min : bool
        Verify that F does not decrease beside every minimal direction.
    lifts : bool
        Run the lift endpoint check for each broken pair whose p-geodesic
        is not conjugate.
    global_min : bool
        Whether x0 is the global minimum.  For other local minima the lift
        starts at gamma(0.9 d(q, x0)), i.e. after moving q towards x0.

    Raises
    ------
    PreconditionError
        x0 fails the local-minimum verification.
    """
    p = as_point(surface, p)
    q = as_point(surface, q)
    x0 = as_point(surface, x0)
    tol = surface.tol
    same = _same_point(surface, p, q) < 1e-12
    ctx = None if surface.analytic else (context or CutContext(surface, p))
    if d_px is None:
        d_px = distance(surface, p, x0)
    cl = classify_cut_point(surface, p, x0, d_px)
    d_px = min(cl.lengths)
    if surface.analytic:
        A, B = surface.params
        w, L, th = flat.translates(A, B, np.asarray(x0) - np.asarray(p), d_px + tol.minimal_slack)
        alphas = [_FlatMember(float(t), float(l), wk / l) for t, l, wk in zip(th, L, w)]
        alpha_cont = False
    else:
        alphas, alpha_cont = _minimal_from(surface, p, x0, d_px)
        alphas = [a for a in alphas if a.length <= d_px + tol.minimal_slack]
    if same:
        gammas, d_qx = alphas, d_px
    elif surface.analytic:
        A, B = surface.params
        d_qx = flat.distance(A, B, q, x0)
        w, L, th = flat.translates(A, B, np.asarray(x0) - np.asarray(q), d_qx + tol.minimal_slack)
        gammas = [_FlatMember(float(t), float(l), wk / l) for t, l, wk in zip(th, L, w)]
    else:
        d_qx = distance(surface, q, x0)
        gammas, _ = _minimal_from(surface, q, x0, d_qx)
    F0 = d_px + d_qx
    verified, _ = (True, 0.0)
    if check_local_min:
        verified, worst = _verify_local_min(surface, ctx, p, q, same, [a.theta for a in alphas], F0, cl.continuum)
        if not verified:
            raise PreconditionError(f"x0 fails local-min verification (F drops by {-worst:.3e} nearby)")

    pairs = []
    if cl.continuum and not same:
        # a continuum of minimal geodesics from p: extend each gamma by F and
        # look for a landing at p
        for jg, g in enumerate(gammas):
            st = end_state(surface, q, g.theta, F0)
            land = _same_point(surface, st.point, p)
            pairs.append(PairTest(-1, jg, 0.0, bool(land < tol.landing), float(land)))
    else:
        for ia, a in enumerate(alphas):
            for jg, g in enumerate(gammas):
                res = abs(angle_between(a.arrival, g.arrival) - math.pi)
                through = False
                land = math.nan
                if res < tol.opposition_angle:
                    st = end_state(surface, p, a.theta, F0)
                    land = _same_point(surface, st.point, q)
                    through = land < tol.landing
                pairs.append(PairTest(ia, jg, float(res), bool(through), float(land)))
    n_through = sum(t.through for t in pairs)

    checks = []
    if lifts and not alpha_cont:
        rel = tol.conjugacy_rel * d_px
        start = 0.0 if global_min else 0.9
        for t in pairs:
            if t.through or t.alpha < 0:
                continue
            a = alphas[t.alpha]
            if abs(a.j_end) < rel:
                continue
            checks.append(_lift_check(surface, p, q, a, gammas[t.gamma], t.alpha, t.gamma, d_px, start))
    return DichotomyVerdict(
        p=p,
        q=q,
        x0=x0,
        F=float(F0),
        d_px=float(d_px),
        d_qx=float(d_qx),
        branch_conjugate=bool(cl.essential),
        branch_through=bool(n_through > 0),
        through_count=int(n_through),
        alpha_angles=tuple(float(a.theta) for a in alphas),
        alpha_conjugate=tuple(bool(abs(a.j_end) < tol.conjugacy_rel * d_px) for a in alphas),
        gamma_angles=tuple(float(g.theta) for g in gammas),
        continuum=bool(cl.continuum),
        pairs=tuple(pairs),
        smoothness_residuals=tuple(t.angle_residual for t in pairs),
        lifts=tuple(checks),
        local_min_verified=bool(verified),
    )


@dataclass(frozen=True)
class _FlatMember:
    theta: float
    length: float
    arrival: np.ndarray

    @property
    def j_end(self):
        return self.length


def verdicts(surface, p, q, n_dirs=64, atlas=None, lifts=True):
    """Verdicts at every refined local minimum of F_{p;q}."""
    atlas = atlas or f_min_on_cutlocus(surface, p, q, n_dirs)
    out = []
    g = atlas.global_min
    for m in atlas.minima:
        out.append(
            dichotomy_verdict(
                surface, atlas.p, atlas.q, m.point, d_px=m.sigma, lifts=lifts, global_min=m is g, context=atlas.context
            )
        )
    return atlas, out


# p = q closed-geodesic clause --------------------------------------------------


@dataclass(frozen=True)
class ClosedGeodesicCheck:
    symmetric: bool
    d_px: float
    nearest_from_x0: float
    closed: bool
    return_residual: float

    def record(self):
        return dict(
            symmetric=self.symmetric,
            d_px=self.d_px,
            nearest_from_x0=self.nearest_from_x0,
            closed=self.closed,
            return_residual=self.return_residual,
        )


def closed_geodesic_check(surface, p, verdict, n_dirs=64):
    """For p = q: test d(p, x0) = min d(x0, .) on C_{x0} and loop closure.

    When the symmetry holds the two minimal geodesics p -> x0 must leave p
    in opposite directions, so that their union is a closed geodesic.
    """
    tol = surface.tol
    x0 = verdict.x0
    samples = sample_cut_locus(surface, x0, n_dirs)
    near = min(s.sigma for s in samples if s.ok)
    if surface.analytic:
        near = min(near, 0.5 * min(surface.params))
    symmetric = abs(near - verdict.d_px) < 10 * tol.cut_shortfall
    best = math.inf
    ang = verdict.alpha_angles
    for i in range(len(ang)):
        for j in range(i + 1, len(ang)):
            best = min(best, abs(abs(circ_diff(ang[i], ang[j])) - math.pi))
    closed = best < tol.closure_angle
    return ClosedGeodesicCheck(bool(symmetric), verdict.d_px, float(near), bool(closed), float(best))


# moving q ----------------------------------------------------------------------


@dataclass(frozen=True)
class Reduction:
    """Result of moving q along gamma towards x0."""

    t: float
    q_t: np.ndarray
    d_q_qt: float
    F_before: float
    F_after: float
    F_shift_error: float
    argmin_shift: float
    argmin_fixed: bool
    verdict: DichotomyVerdict

    def record(self):
        return {
            "t": self.t,
            "q_t": np.asarray(self.q_t).tolist(),
            "d_q_qt": self.d_q_qt,
            "F_before": self.F_before,
            "F_after": self.F_after,
            "F_shift_error": self.F_shift_error,
            "argmin_shift": self.argmin_shift,
            "argmin_fixed": bool(self.argmin_fixed),
            "verdict": self.verdict.record(),
        }


def moving_q_reduction(surface, p, q, x0, t, atlas=None, n_dirs=64):
    """Move q to q_t = gamma(t d(q, x0)) and re-minimize F_{p;q_t}.

    ``argmin_shift`` is the angular distance between the refined global
    argmin for q_t and the nearest minimal direction of x0; it is compared
    with the atlas resolution 2 pi / n_dirs.
    """
    if not 0 < t < 1:
        raise PreconditionError("t must lie in (0, 1)")
    p = as_point(surface, p)
    q = as_point(surface, q)
    x0 = as_point(surface, x0)
    tol = surface.tol
    same = _same_point(surface, p, q) < 1e-12
    gamma = nearest(surface, q, x0)
    d_qx = gamma.length
    d_px = distance(surface, p, x0)
    q_t = end_state(surface, q, gamma.theta, t * d_qx).point
    d_q_qt = t * d_qx
    samples = None if atlas is None else list(atlas.samples)
    ctx = None if atlas is None else atlas.context
    new = f_min_on_cutlocus(surface, p, q_t, n_dirs if samples is None else len(samples), samples=samples, context=ctx)
    F_before = d_px + d_qx
    F_after = d_px + distance(surface, q_t, x0)
    err = abs(F_after - (F_before - d_q_qt))
    m = new.global_min
    v = dichotomy_verdict(surface, p, q_t, x0, d_px=d_px, context=new.context)
    shift = min(abs(circ_diff(m.theta, a)) for a in v.alpha_angles) if v.alpha_angles else math.inf
    res = len(new.samples)
    fixed = shift <= TWO_PI / res or _same_point(surface, m.point, x0) < 1e-3
    return Reduction(float(t), q_t, float(d_q_qt), float(F_before), float(F_after), float(err), float(shift), bool(fixed), v)


# sublevel inequality -----------------------------------------------------------


@dataclass(frozen=True)
class StarshapedResult:
    max_violation: float
    mid_value: float
    triangle_defect: float
    n_samples: int

    def record(self):
        return dict(
            max_violation=self.max_violation,
            mid_value=self.mid_value,
            triangle_defect=self.triangle_defect,
            n_samples=self.n_samples,
        )


def starshaped_check(surface, p, q, x0, n_samples=16, d_px=None, alpha_theta=None):
    """max_t F(gamma(t)) - F(x0) over t in [0, d(q, x0)) along a minimal gamma.

    Distances from p are first bounded above by continuing the minimal
    geodesic p -> x0 (direction ``alpha_theta``) with Newton as gamma(t)
    moves back from x0 to q; the exact distance replaces the bound where
    the bound comes within ``STAR_MARGIN`` of F(x0).  ``max_violation`` is
    therefore exact when it is near zero and an upper bound otherwise.

    Also returns F(gamma(d/2)) - F(x0), which equals minus the triangle
    defect d(gamma(d/2), x0) + d(x0, p) - d(gamma(d/2), p); it is computed
    with the exact distance.
    """
    p = as_point(surface, p)
    q = as_point(surface, q)
    x0 = as_point(surface, x0)
    gamma = nearest(surface, q, x0)
    if gamma is None:
        raise PreconditionError("q coincides with x0")
    d = gamma.length
    if d_px is None or alpha_theta is None:
        a = nearest(surface, p, x0)
        d_px = a.length if d_px is None else d_px
        alpha_theta = a.theta if alpha_theta is None else alpha_theta
    F0 = d_px + d
    g = shoot(surface, q, gamma.theta, d)
    follow = _Follower(surface, p, alpha_theta, d_px)
    worst = -math.inf
    for t in (np.arange(n_samples) * d / n_samples)[::-1]:
        k = min(int(round(t / g.step)), len(g.t) - 1)
        x, tk = g.points[k], g.t[k]
        Fv = follow(x) + tk
        if Fv > F0 - STAR_MARGIN:
            Fv = _dist0(surface, p, x) + tk
        worst = max(worst, Fv - F0)
    k = min(int(round(0.5 * d / g.step)), len(g.t) - 1)
    mid = _dist0(surface, p, g.points[k]) + g.t[k] - F0
    return StarshapedResult(float(worst), float(mid), float(-mid), int(n_samples))


STAR_MARGIN = 1e-6


class _Follower:
    """Length of a geodesic from p to a slowly moving point (upper bound of d)."""

    def __init__(self, surface, p, theta, length):
        self.surface = surface
        self.p = p
        self.shot = (theta, length)
        if not surface.analytic:
            self.frame = kernel_frame(surface, p)

    def __call__(self, x):
        surface = self.surface
        if surface.analytic:
            return flat.distance(*surface.params, self.p, x)
        if self.shot is None:
            return math.inf
        s = newton(surface, self.frame, np.asarray(x, dtype=float), *self.shot, L_max=2 * surface.diameter_estimate)
        if s.residual >= surface.tol.member_residual:
            self.shot = None
            return math.inf
        self.shot = (s.theta, s.length)
        return s.length


def _dist0(surface, a, b):
    return 0.0 if _same_point(surface, a, b) < 1e-12 else distance(surface, a, b)


# two-geodesics characterization ---------------------------------------------


@dataclass(frozen=True)
class CharacterizationReport:
    """Outcome of the two-geodesics characterization at p."""

    p: np.ndarray
    essential_found: bool
    essential_theta: float | None
    essential_point: list | None
    asserted: bool
    grid_size: int
    min_connections: int | None
    failures: list
    L_max: float

    @property
    def passed(self):
        return self.essential_found or (self.asserted and not self.failures)

    def record(self):
        return {
            "p": np.asarray(self.p).tolist(),
            "branch": "essential_point" if self.essential_found else "two_geodesics",
            "essential_found": bool(self.essential_found),
            "essential_theta": self.essential_theta,
            "essential_point": self.essential_point,
            "asserted": bool(self.asserted),
            "grid_size": self.grid_size,
            "min_connections": self.min_connections,
            "failures": self.failures,
            "L_max": self.L_max,
            "passed": bool(self.passed),
        }


def two_geodesics_characterization(surface, p, n_dirs=64, grid_n=16, L_max=None, samples=None):
    """Either C_p has an essential point, or every q has two geodesics from p."""
    p = as_point(surface, p)
    L_max = 2 * surface.diameter_estimate if L_max is None else float(L_max)
    samples = samples if samples is not None else sample_cut_locus(surface, p, n_dirs)
    ess = [s for s in samples if s.ok and s.essential]
    if ess:
        s = min(ess, key=lambda s: s.sigma)
        return CharacterizationReport(p, True, s.theta, np.asarray(s.point).tolist(), False, grid_n * grid_n, None, [], L_max)
    counts = []
    failures = []
    for x in grid(surface, grid_n):
        if _same_point(surface, p, x) < 1e-12:
            # a loop and its reversal are two geodesics from p to itself
            n = 2 * len(find_loops(surface, p, L_max))
        else:
            n = len(connect_points(surface, p, x, L_max))
        counts.append(n)
        if n < 2:
            failures.append(np.asarray(x).tolist())
    return CharacterizationReport(p, False, None, None, True, grid_n * grid_n, int(min(counts)), failures, L_max)


# radius of M --------------------------------------------------------------------


@dataclass(frozen=True)
class RadiusReport:
    rad: float
    center: np.ndarray
    grid_n: int
    evaluations: int

    def record(self):
        return {"rad": self.rad, "center": np.asarray(self.center).tolist(), "grid_n": self.grid_n, "evaluations": self.evaluations}


RADIUS_FAN = 16
RADIUS_TIE = 1e-6


def manifold_radius(surface, grid_n=32):
    """rad(M) = min_p max_x d(p, x) over a uniform grid.

    Exact min-max over the grid: a base point is abandoned as soon as one
    of its distances comes within ``RADIUS_TIE`` diameters of the best
    radius found so far, and farthest chords are tried first so that this
    happens early.  Distances on embedded surfaces use fans of
    ``RADIUS_FAN`` directions.
    """
    if grid_n < 32:
        raise PreconditionError("grid must be at least 32 x 32")
    pts = grid(surface, grid_n)
    if surface.analytic:
        a, b = surface.params
        r = np.array([np.max(flat.distances_to(a, b, x, pts)) for x in pts])
        k = int(np.argmin(r))
        return RadiusReport(float(r[k]), pts[k], grid_n, len(pts) ** 2)
    tie = RADIUS_TIE * surface.diameter_estimate
    L_max = 1.5 * surface.diameter_estimate
    best, center, evals = math.inf, None, 0
    for p in pts:
        chords = np.linalg.norm(pts - p, axis=1)
        worst = 0.0
        for k in np.argsort(-chords, kind="stable"):
            if chords[k] < 1e-12:
                continue
            sh = _shortest(surface, p, pts[k], L_max, RADIUS_FAN)
            evals += 1
            if sh is not None:
                worst = max(worst, sh.length)
            if worst >= best - tie:
                break
        else:
            best, center = worst, p
    return RadiusReport(float(best), center, grid_n, evals)
