"""The acceptance suite: criteria 1 to 10 on the reference catalog.

Each criterion is a function of the seed that returns a
``CriterionResult``.  ``run_all`` runs them in order (or on a process pool
when ``jobs > 1``; results are always assembled in criterion order) and is
shared by ``cutlab verify-all`` and ``tests/test_acceptance.py``.

Criteria 3, 5 and 7 use the same seeded dichotomy runs and are evaluated
together.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import flat
from .connections import distance, nearest
from .cutlocus import CutContext, radii_report, sample_cut_locus
from .errors import CutlabError, PreconditionError
from .geodesic_engine import conjugate_time, end_state
from .klingenberg import (
    _lift_check,
    check_not_cut_point,
    closed_geodesic_check,
    f_min_on_cutlocus,
    manifold_radius,
    moving_q_reduction,
    starshaped_check,
    two_geodesics_characterization,
    verdicts,
)
from .manifold import SurfaceSpec, catalog, frame_at, from_params, random_points

ORDER = ("sphere", "ellipsoid", "torus", "flat_torus")


@dataclass
class CriterionResult:
    id: int
    title: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def record(self):
        # wall time is left out so that the report is reproducible
        return {"id": self.id, "title": self.title, "passed": bool(self.passed), "summary": self.summary, "details": self.details}

    def line(self):
        return f"criterion {self.id:2d} {'PASS' if self.passed else 'FAIL'}  {self.title}: {self.summary}  [{self.seconds:.1f} s]"


@dataclass
class SuiteResult:
    criteria: list

    @property
    def passed(self):
        return all(c.passed for c in self.criteria)

    def record(self):
        return {
            "passed": self.passed,
            "n_passed": sum(c.passed for c in self.criteria),
            "n_criteria": len(self.criteria),
            "criteria": [c.record() for c in self.criteria],
        }


def _rng(seed, *key):
    return np.random.default_rng([seed, *key])


def _pt(x):
    return [float(v) for v in np.asarray(x)]


# 1 ---------------------------------------------------------------------------


def c1_conjugate_radius(seed):
    out = {}
    ok = True
    for R in (1.0, 2.0):
        s = SurfaceSpec.sphere(R)
        p = random_points(s, 1, _rng(seed, 1, int(R)))[0]
        th = np.arange(64) * 2 * math.pi / 64
        err = max(abs(conjugate_time(s, p, t) - math.pi * R) for t in th)
        out[f"sphere_R{R:g}"] = {"p": _pt(p), "max_error": err, "expected": math.pi * R}
        ok &= err < 1e-4
    summary = ", ".join(f"{k}: max |kappa - pi R| = {v['max_error']:.2e}" for k, v in out.items())
    return CriterionResult(1, "conjugate radius on round spheres", bool(ok), summary + " (tol 1e-4)", out)


# 2 ---------------------------------------------------------------------------


def _injrad_cases():
    ell = catalog()["ellipsoid"]
    tor = catalog()["torus"]
    return [
        ("sphere", SurfaceSpec.sphere(1.0), np.array([1.0, 0.0, 0.0])),
        ("flat_torus_1x2", SurfaceSpec.flat_torus(1.0, 2.0), np.array([0.0, 0.0])),
        ("torus_outer", tor, from_params(tor, 0.0, 0.0)),
        ("torus_top", tor, from_params(tor, 0.0, math.pi / 2)),
        ("torus_inner", tor, from_params(tor, 0.0, math.pi)),
        ("ellipsoid_pole", ell, from_params(ell, 0.0, 0.0)),
        ("ellipsoid_equator", ell, from_params(ell, math.pi / 2, 0.0)),
        ("ellipsoid_mid", ell, from_params(ell, math.pi / 4, math.pi / 3)),
    ]


def c2_injrad(seed):
    out = {}
    worst = 0.0
    for name, s, p in _injrad_cases():
        r = radii_report(s, p)
        out[name] = {
            "injrad": r.injrad,
            "conj_eps": r.conj_eps,
            "half_loop": None if r.shortest_loop is None else 0.5 * r.shortest_loop,
            "relative_residual": r.relative_residual,
        }
        worst = max(worst, r.relative_residual)
    return CriterionResult(
        2, "injectivity radius identity", bool(worst < 0.02), f"max relative residual {worst:.2e} over {len(out)} base points (tol 2e-2)", out
    )


# 3, 5, 7 -----------------------------------------------------------------------


def _pairs(surface, rng, n):
    """n seeded (p, q) pairs with q off the cut locus of p."""
    out = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > 20 * n:
            raise PreconditionError("could not draw pairs with q outside C_p")
        p, q = random_points(surface, 2, rng)
        ctx = None if surface.analytic else CutContext(surface, p)
        try:
            check_not_cut_point(surface, p, q, ctx)
        except PreconditionError:
            continue
        out.append((p, q, ctx))
    return out


def _broken_lifts(surface, atlas, k_max=3):
    """Lift checks at non-conjugate two-branch cut points of p.

    For an interior point x0 of the cut segment, reached by alpha_1 and
    alpha_2 with arrival tangents u1 and u2, q is placed at distance
    sigma / 4 from x0 in the direction -1.5 u1 + 0.5 u2, which lies on the
    alpha_1 side of the cut locus.  The lift of the geodesic q -> x0 must
    end at d(p, x0) alpha_1'(0).
    """
    p = atlas.p
    tol = surface.tol
    cand = [s for s in atlas.samples if s.ok and s.count == 2 and not s.essential and s.competitor is not None]
    if not cand:
        return []
    rel = tol.conjugacy_rel
    cand = [s for s in cand if abs(s.j_sigma) > 10 * rel * s.sigma]
    step = max(1, len(cand) // k_max)
    out = []
    for s in cand[::step][:k_max]:
        th2, L2 = s.competitor
        e1 = end_state(surface, p, s.theta, s.sigma)
        e2 = end_state(surface, p, th2, L2)
        v = -1.5 * e1.tangent + 0.5 * e2.tangent
        v /= np.linalg.norm(v)
        x0 = e1.point
        rho = 0.25 * s.sigma
        q = end_state(surface, x0, frame_at(surface, x0).angle_of(v), rho).point
        gamma = nearest(surface, q, x0)
        alpha = _Alpha(s.theta, s.sigma, e1.j)
        chk = _lift_check(surface, p, q, alpha, gamma, 0, 0, s.sigma, 0.0)
        out.append({"theta": s.theta, "x0": _pt(x0), "q": _pt(q), "d_qx": gamma.length, **chk.record()})
    return out


@dataclass(frozen=True)
class _Alpha:
    theta: float
    length: float
    j_end: float


def _dichotomy_runs(seed, n_pairs=5):
    runs = {}
    for idx, name in enumerate(ORDER):
        s = catalog()[name]
        rng = _rng(seed, 3, idx)
        items = []
        for p, q, ctx in _pairs(s, rng, n_pairs):
            item = {"p": _pt(p), "q": _pt(q), "minima": [], "violations": 0}
            atlas = f_min_on_cutlocus(s, p, q, context=ctx)
            try:
                atlas, vs = verdicts(s, p, q, atlas=atlas, lifts=name == "ellipsoid")
            except PreconditionError as exc:
                item["error"] = str(exc)
                item["violations"] += 1
                vs = []
            for v in vs:
                item["minima"].append(
                    {
                        "x0": _pt(v.x0),
                        "F": v.F,
                        "branch_conjugate": v.branch_conjugate,
                        "branch_through": v.branch_through,
                        "through_count": v.through_count,
                        "lifts": [c.record() for c in v.lifts],
                    }
                )
                item["violations"] += int(not v.holds)
            items.append((item, atlas))
        runs[name] = items
    return runs


def c3_c5_c7(seed):
    runs = _dichotomy_runs(seed)

    # 3: dichotomy sweep
    det3 = {}
    n_min = n_bad = 0
    for name, items in runs.items():
        det3[name] = [it for it, _ in items]
        n_min += sum(len(it["minima"]) for it, _ in items)
        n_bad += sum(it["violations"] for it, _ in items)
    r3 = CriterionResult(
        3, "dichotomy sweep", n_bad == 0 and n_min > 0, f"{n_min} refined local minima over {sum(len(v) for v in runs.values())} pairs, {n_bad} violations", det3
    )

    # 5: lift endpoints in the broken case on the ellipsoid
    s = catalog()["ellipsoid"]
    sweep = [c for it, _ in runs["ellipsoid"] for m in it["minima"] for c in m["lifts"]]
    built = []
    for _, atlas in runs["ellipsoid"][:2]:
        built += _broken_lifts(s, atlas)
    checks = sweep + built
    ok5 = bool(checks) and all(c["passed"] for c in checks)
    rmax = max((c["radius_error"] for c in checks), default=math.nan)
    amax = max((c["angle_error"] for c in checks), default=math.nan)
    r5 = CriterionResult(
        5,
        "lift endpoint in the broken case",
        ok5,
        f"{len(checks)} lifts ({len(sweep)} from the sweep, {len(built)} at two-branch cut points): "
        f"max radius error {rmax:.2e} (tol 1e-4), max angle error {amax:.2e} (tol 1e-3)",
        {"sweep": sweep, "two_branch": built},
    )

    # 7: moving q towards x0
    det7 = {}
    ok7 = True
    worst_shift = 0.0
    for name, items in runs.items():
        s = catalog()[name]
        it, atlas = items[0]
        m = atlas.global_min
        rows = []
        for t in (0.5, 0.9):
            r = moving_q_reduction(s, atlas.p, atlas.q, m.point, t, atlas=atlas)
            rows.append({"t": t, "F_shift_error": r.F_shift_error, "argmin_shift": r.argmin_shift, "argmin_fixed": r.argmin_fixed})
            ok7 &= r.argmin_fixed and r.F_shift_error < 1e-5
            worst_shift = max(worst_shift, r.F_shift_error)
        det7[name] = rows
    r7 = CriterionResult(
        7, "moving q towards x0", bool(ok7), f"max |F shift - d(q, q_t)| {worst_shift:.2e} (tol 1e-5), argmin fixed in every case: {bool(ok7)}", det7
    )
    return [r3, r5, r7]


# 4 -----------------------------------------------------------------------------


def c4_both_branches(seed):
    ft = catalog()["flat_torus"]
    p = np.zeros(2)
    _, vs = verdicts(ft, p, p)
    flat_ok = False
    flat_det = []
    for v in vs:
        cg = closed_geodesic_check(ft, p, v)
        flat_det.append({"x0": _pt(v.x0), "through_count": v.through_count, **cg.record()})
        flat_ok |= v.branch_through and cg.closed and cg.return_residual < 1e-3
    sp = catalog()["sphere"]
    ps = np.array([0.0, 0.0, 1.0])
    _, vs = verdicts(sp, ps, ps)
    sph_ok = any(v.branch_conjugate for v in vs)
    sph_det = [{"x0": _pt(v.x0), "branch_conjugate": v.branch_conjugate, "F": v.F} for v in vs]
    return CriterionResult(
        4,
        "both branches witnessed",
        bool(flat_ok and sph_ok),
        f"flat torus closed-geodesic branch: {flat_ok}, sphere essential-conjugate branch: {sph_ok}",
        {"flat_torus": flat_det, "sphere": sph_det},
    )


# 6 -----------------------------------------------------------------------------


def c6_sublevel(seed, n_base=4, n_q=25):
    """x0 is the sampled global minimum of F on the 64-direction atlas."""
    det = {}
    worst = -math.inf
    total = 0
    for idx, name in enumerate(ORDER):
        s = catalog()[name]
        rng = _rng(seed, 6, idx)
        w_s = -math.inf
        n_s = 0
        for p in random_points(s, n_base, rng):
            ctx = None if s.analytic else CutContext(s, p)
            samples = sample_cut_locus(s, p, 64, ctx)
            done = tries = 0
            while done < n_q and tries < 4 * n_q:
                tries += 1
                q = random_points(s, 1, rng)[0]
                try:
                    atlas = f_min_on_cutlocus(s, p, q, samples=samples, context=ctx, prune=True, refine=False)
                except PreconditionError:
                    continue
                m = atlas.global_min
                r = starshaped_check(s, p, q, m.point, d_px=m.sigma, alpha_theta=m.theta)
                w_s = max(w_s, r.max_violation)
                done += 1
            n_s += done
        det[name] = {"instances": n_s, "max_violation": w_s}
        worst = max(worst, w_s)
        total += n_s
    ok = worst < 1e-4 and all(v["instances"] == n_base * n_q for v in det.values())
    return CriterionResult(6, "sublevel property along gamma", bool(ok), f"max violation {worst:.2e} over {total} instances (tol 1e-4)", det)


# 8 -----------------------------------------------------------------------------


def _jacobi_fd(seed, n=50, delta=1e-5):
    names = ("sphere", "ellipsoid", "torus")
    rng = _rng(seed, 8, 0)
    worst = 0.0
    k = 0
    while k < n:
        s = catalog()[names[k % 3]]
        p = random_points(s, 1, rng)[0]
        th = rng.uniform(0, 2 * math.pi)
        t = rng.uniform(0.3, 2.5)
        j = end_state(s, p, th, t).j
        if abs(j) < 0.05:
            continue  # too close to a conjugate point for a relative error
        xp = end_state(s, p, th + delta, t).point
        xm = end_state(s, p, th - delta, t).point
        fd = np.linalg.norm(xp - xm) / (2 * delta)
        worst = max(worst, abs(abs(j) - fd) / fd)
        k += 1
    return worst


def _bvp_roundtrip(seed, n=200):
    names = ("sphere", "ellipsoid", "torus", "flat_torus")
    rng = _rng(seed, 8, 1)
    worst = 0.0
    longer = 0
    for k in range(n):
        s = catalog()[names[k % 4]]
        if s.is_flat:
            s = s.replace(backend="ode")
        p = random_points(s, 1, rng)[0]
        th = rng.uniform(0, 2 * math.pi)
        L = rng.uniform(0.05, 0.6) * s.diameter_estimate
        x = end_state(s, p, th, L).point
        c = nearest(s, p, x)
        worst = max(worst, c.residual)
        longer += int(c.length > L + 1e-6)
    return worst, longer


def _flat_backends(seed, n=100):
    ode = catalog()["flat_torus"].replace(backend="ode")
    rng = _rng(seed, 8, 2)
    worst = 0.0
    for _ in range(n):
        a, b = random_points(ode, 2, rng)
        worst = max(worst, abs(distance(ode, a, b) - flat.distance(1.0, 1.0, a, b)))
    return worst


def c8_kernels(seed):
    jac = _jacobi_fd(seed)
    bvp, longer = _bvp_roundtrip(seed)
    fb = _flat_backends(seed)
    ok = jac < 1e-2 and bvp < 1e-6 and longer == 0 and fb < 1e-6
    det = {"jacobi_fd_max_rel_error": jac, "bvp_max_residual": bvp, "bvp_longer_than_shot": longer, "flat_backend_max_diff": fb}
    return CriterionResult(
        8,
        "numerical kernels",
        bool(ok),
        f"Jacobi vs FD {jac:.2e} (tol 1e-2), BVP roundtrip {bvp:.2e} (tol 1e-6), flat ODE vs exact {fb:.2e} (tol 1e-6)",
        det,
    )


# 9, 10 -------------------------------------------------------------------------


def c9_characterization(seed):
    ft = catalog()["flat_torus"]
    rf = two_geodesics_characterization(ft, np.zeros(2), grid_n=16)
    sp = catalog()["sphere"]
    rs = two_geodesics_characterization(sp, np.array([0.0, 0.0, 1.0]), grid_n=16)
    ok = (not rf.essential_found) and rf.min_connections is not None and rf.min_connections >= 2 and rs.essential_found
    return CriterionResult(
        9,
        "two-geodesics characterization",
        bool(ok),
        f"flat torus: essential {rf.essential_found}, min connections {rf.min_connections} on 16x16; sphere: essential {rs.essential_found}",
        {"flat_torus": rf.record(), "sphere": rs.record()},
    )


def c10_radius(seed):
    rs = manifold_radius(catalog()["sphere"])
    rf = manifold_radius(catalog()["flat_torus"])
    es = abs(rs.rad - math.pi) / math.pi
    ef = abs(rf.rad - math.sqrt(0.5)) / math.sqrt(0.5)
    return CriterionResult(
        10,
        "radius of M",
        bool(es < 0.02 and ef < 0.02),
        f"sphere {rs.rad:.5f} (rel err {es:.1e}), flat torus {rf.rad:.5f} (rel err {ef:.1e}), tol 2e-2",
        {"sphere": rs.record(), "flat_torus": rf.record()},
    )


# runner ------------------------------------------------------------------------

TASKS = {
    (1,): c1_conjugate_radius,
    (2,): c2_injrad,
    (3, 5, 7): c3_c5_c7,
    (4,): c4_both_branches,
    (6,): c6_sublevel,
    (8,): c8_kernels,
    (9,): c9_characterization,
    (10,): c10_radius,
}

TITLES = {
    1: "conjugate radius on round spheres",
    2: "injectivity radius identity",
    3: "dichotomy sweep",
    4: "both branches witnessed",
    5: "lift endpoint in the broken case",
    6: "sublevel property along gamma",
    7: "moving q towards x0",
    8: "numerical kernels",
    9: "two-geodesics characterization",
    10: "radius of M",
}


def run_task(ids, seed):
    t0 = time.perf_counter()
    try:
        res = TASKS[ids](seed)
        res = res if isinstance(res, list) else [res]
    except CutlabError as exc:
        res = [CriterionResult(i, TITLES[i], False, f"{type(exc).__name__}: {exc}") for i in ids]
    dt = time.perf_counter() - t0
    for r in res:
        r.seconds = dt
    return res


def run_all(seed=0, jobs=1, echo=None, only=None):
    """Run the selected criteria (all by default) and collect the results."""
    tasks = [ids for ids in TASKS if only is None or any(i in only for i in ids)]
    done = []
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            futures = [ex.submit(run_task, ids, seed) for ids in tasks]
            for f in futures:
                done.append(f.result())
                if echo:
                    for r in done[-1]:
                        echo(r.line())
    else:
        for ids in tasks:
            done.append(run_task(ids, seed))
            if echo:
                for r in done[-1]:
                    echo(r.line())
    results = sorted((r for rs in done for r in rs if only is None or r.id in only), key=lambda r: r.id)
    return SuiteResult(results)
