"""Compiled inner loops: surface geometry, RK4 stepping, Newton shooting.

Every embedded surface is handled through its implicit function ``f`` with
``f < 0`` inside, so the outward normal is ``grad f / |grad f|``.  The flat
torus is carried in the same 3-vector state with ``z = 0`` and a zero
acceleration, which keeps one code path for the ODE backend.

State layout for the coupled geodesic + scalar Jacobi system::

    y = [x0, x1, x2, v0, v1, v2, j, j']
"""

import math

import numpy as np
from numba import njit

SPHERE = 0
ELLIPSOID = 1
TORUS = 2
FLAT = 3

NEWTON_CONVERGED = 0
NEWTON_STALLED = 1
NEWTON_MAXITER = 2
NEWTON_OUT_OF_RANGE = 3


@njit(cache=True)
def geom(fam, prm, x0, x1, x2):
    """Implicit function, gradient and Hessian (upper triangle) at a point.

    Returns (f, g0, g1, g2, H00, H01, H02, H11, H12, H22).
    """
    if fam == SPHERE:
        f = x0 * x0 + x1 * x1 + x2 * x2 - prm[0] * prm[0]
        return f, 2.0 * x0, 2.0 * x1, 2.0 * x2, 2.0, 0.0, 0.0, 2.0, 0.0, 2.0
    if fam == ELLIPSOID:
        w0 = 1.0 / (prm[0] * prm[0])
        w1 = 1.0 / (prm[1] * prm[1])
        w2 = 1.0 / (prm[2] * prm[2])
        f = x0 * x0 * w0 + x1 * x1 * w1 + x2 * x2 * w2 - 1.0
        return (f, 2.0 * x0 * w0, 2.0 * x1 * w1, 2.0 * x2 * w2,
                2.0 * w0, 0.0, 0.0, 2.0 * w1, 0.0, 2.0 * w2)
    if fam == TORUS:
        R = prm[0]
        r = prm[1]
        rho2 = x0 * x0 + x1 * x1
        rho = math.sqrt(rho2)
        rho3 = rho2 * rho
        dr = rho - R
        f = dr * dr + x2 * x2 - r * r
        return (f, 2.0 * dr * x0 / rho, 2.0 * dr * x1 / rho, 2.0 * x2,
                2.0 * (x0 * x0 / rho2 + dr * x1 * x1 / rho3),
                2.0 * R * x0 * x1 / rho3, 0.0,
                2.0 * (x1 * x1 / rho2 + dr * x0 * x0 / rho3), 0.0, 2.0)
    return 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0


@njit(cache=True)
def implicit(fam, prm, x, g, H):
    """Array-filling wrapper around ``geom`` for callers outside the hot loop."""
    f, g0, g1, g2, h00, h01, h02, h11, h12, h22 = geom(fam, prm, x[0], x[1], x[2])
    g[0] = g0
    g[1] = g1
    g[2] = g2
    H[0, 0] = h00
    H[0, 1] = h01
    H[1, 0] = h01
    H[0, 2] = h02
    H[2, 0] = h02
    H[1, 1] = h11
    H[1, 2] = h12
    H[2, 1] = h12
    H[2, 2] = h22
    return f


@njit(cache=True)
def unit_normal(fam, prm, x0, x1, x2):
    if fam == FLAT:
        return 0.0, 0.0, 1.0
    f, g0, g1, g2, h00, h01, h02, h11, h12, h22 = geom(fam, prm, x0, x1, x2)
    s = math.sqrt(g0 * g0 + g1 * g1 + g2 * g2)
    return g0 / s, g1 / s, g2 / s


@njit(cache=True)
def normal(fam, prm, x, out):
    n0, n1, n2 = unit_normal(fam, prm, x[0], x[1], x[2])
    out[0] = n0
    out[1] = n1
    out[2] = n2


@njit(cache=True)
def _curv(fam, prm, g0, g1, g2, h00, h01, h02, h11, h12, h22):
    # g^T adj(H) g / |g|^4 for symmetric H
    a00 = h11 * h22 - h12 * h12
    a11 = h00 * h22 - h02 * h02
    a22 = h00 * h11 - h01 * h01
    a01 = h02 * h12 - h01 * h22
    a02 = h01 * h12 - h02 * h11
    a12 = h02 * h01 - h00 * h12
    num = (a00 * g0 * g0 + a11 * g1 * g1 + a22 * g2 * g2
           + 2.0 * (a01 * g0 * g1 + a02 * g0 * g2 + a12 * g1 * g2))
    gg = g0 * g0 + g1 * g1 + g2 * g2
    return num / (gg * gg)


@njit(cache=True)
def curvature_xyz(fam, prm, x0, x1, x2):
    if fam == FLAT:
        return 0.0
    if fam == SPHERE:
        return 1.0 / (prm[0] * prm[0])
    f, g0, g1, g2, h00, h01, h02, h11, h12, h22 = geom(fam, prm, x0, x1, x2)
    return _curv(fam, prm, g0, g1, g2, h00, h01, h02, h11, h12, h22)


@njit(cache=True)
def gauss_curvature(fam, prm, x):
    """Gaussian curvature via the bordered-Hessian formula g^T adj(H) g / |g|^4."""
    return curvature_xyz(fam, prm, x[0], x[1], x[2])


@njit(cache=True)
def deriv(fam, prm, y0, y1, y2, y3, y4, y5, y6, y7):
    if fam == FLAT:
        return y3, y4, y5, 0.0, 0.0, 0.0, y7, 0.0
    f, g0, g1, g2, h00, h01, h02, h11, h12, h22 = geom(fam, prm, y0, y1, y2)
    vHv = (h00 * y3 * y3 + h11 * y4 * y4 + h22 * y5 * y5
           + 2.0 * (h01 * y3 * y4 + h02 * y3 * y5 + h12 * y4 * y5))
    gg = g0 * g0 + g1 * g1 + g2 * g2
    lam = vHv / gg
    if fam == SPHERE:
        K = 1.0 / (prm[0] * prm[0])
    else:
        K = _curv(fam, prm, g0, g1, g2, h00, h01, h02, h11, h12, h22)
    return y3, y4, y5, -lam * g0, -lam * g1, -lam * g2, y7, -K * y6


@njit(cache=True)
def project_xyz(fam, prm, x0, x1, x2):
    """Return the surface point obtained by reprojecting (x0, x1, x2)."""
    if fam == SPHERE:
        s = prm[0] / math.sqrt(x0 * x0 + x1 * x1 + x2 * x2)
        return x0 * s, x1 * s, x2 * s
    if fam == TORUS:
        R = prm[0]
        r = prm[1]
        rho = math.sqrt(x0 * x0 + x1 * x1)
        c0 = R * x0 / rho
        c1 = R * x1 / rho
        d0 = x0 - c0
        d1 = x1 - c1
        s = r / math.sqrt(d0 * d0 + d1 * d1 + x2 * x2)
        return c0 + s * d0, c1 + s * d1, s * x2
    if fam == ELLIPSOID:
        for _ in range(4):
            f, g0, g1, g2, h00, h01, h02, h11, h12, h22 = geom(fam, prm, x0, x1, x2)
            if abs(f) < 1e-16:
                break
            c = f / (g0 * g0 + g1 * g1 + g2 * g2)
            x0 -= c * g0
            x1 -= c * g1
            x2 -= c * g2
        return x0, x1, x2
    return x0, x1, 0.0


@njit(cache=True)
def project_point(fam, prm, x):
    """Move ``x`` onto the surface in place."""
    a, b, c = project_xyz(fam, prm, x[0], x[1], x[2])
    x[0] = a
    x[1] = b
    x[2] = c


@njit(cache=True)
def rk4_tuple(fam, prm, y, h):
    """One RK4 step with reprojection; returns (new state tuple, speed drift)."""
    y0, y1, y2, y3, y4, y5, y6, y7 = y
    a0, a1, a2, a3, a4, a5, a6, a7 = deriv(fam, prm, y0, y1, y2, y3, y4, y5, y6, y7)
    hh = 0.5 * h
    b0, b1, b2, b3, b4, b5, b6, b7 = deriv(
        fam, prm, y0 + hh * a0, y1 + hh * a1, y2 + hh * a2, y3 + hh * a3,
        y4 + hh * a4, y5 + hh * a5, y6 + hh * a6, y7 + hh * a7)
    c0, c1, c2, c3, c4, c5, c6, c7 = deriv(
        fam, prm, y0 + hh * b0, y1 + hh * b1, y2 + hh * b2, y3 + hh * b3,
        y4 + hh * b4, y5 + hh * b5, y6 + hh * b6, y7 + hh * b7)
    d0, d1, d2, d3, d4, d5, d6, d7 = deriv(
        fam, prm, y0 + h * c0, y1 + h * c1, y2 + h * c2, y3 + h * c3,
        y4 + h * c4, y5 + h * c5, y6 + h * c6, y7 + h * c7)
    w = h / 6.0
    z0 = y0 + w * (a0 + 2.0 * b0 + 2.0 * c0 + d0)
    z1 = y1 + w * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
    z2 = y2 + w * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
    z3 = y3 + w * (a3 + 2.0 * b3 + 2.0 * c3 + d3)
    z4 = y4 + w * (a4 + 2.0 * b4 + 2.0 * c4 + d4)
    z5 = y5 + w * (a5 + 2.0 * b5 + 2.0 * c5 + d5)
    z6 = y6 + w * (a6 + 2.0 * b6 + 2.0 * c6 + d6)
    z7 = y7 + w * (a7 + 2.0 * b7 + 2.0 * c7 + d7)
    z0, z1, z2 = project_xyz(fam, prm, z0, z1, z2)
    n0, n1, n2 = unit_normal(fam, prm, z0, z1, z2)
    vn = z3 * n0 + z4 * n1 + z5 * n2
    z3 -= vn * n0
    z4 -= vn * n1
    z5 -= vn * n2
    s2 = z3 * z3 + z4 * z4 + z5 * z5
    s = math.sqrt(s2)
    return (z0, z1, z2, z3 / s, z4 / s, z5 / s, z6, z7), abs(s2 - 1.0)


@njit(cache=True)
def _tup(y):
    return (y[0], y[1], y[2], y[3], y[4], y[5], y[6], y[7])


@njit(cache=True)
def _arr(t, out):
    for i in range(8):
        out[i] = t[i]


@njit(cache=True)
def rk4_step(fam, prm, y, h, out):
    z, drift = rk4_tuple(fam, prm, _tup(y), h)
    _arr(z, out)
    return drift


@njit(cache=True)
def n_steps(L, h, stride):
    m = int(math.ceil(L / (h * stride) - 1e-9))
    if m < 1:
        m = 1
    return m * stride


@njit(cache=True)
def initial_state(p, e1, e2, th):
    y = np.empty(8)
    c = math.cos(th)
    s = math.sin(th)
    for i in range(3):
        y[i] = p[i]
        y[3 + i] = c * e1[i] + s * e2[i]
    y[6] = 0.0
    y[7] = 1.0
    return y


@njit(cache=True)
def shoot_end(fam, prm, y0, L, h):
    """Integrate to arclength L; return (final state, cumulative speed drift)."""
    n = n_steps(L, h, 1)
    dt = L / n
    y = _tup(y0)
    drift = 0.0
    for _ in range(n):
        y, d = rk4_tuple(fam, prm, y, dt)
        drift += d
    out = np.empty(8)
    _arr(y, out)
    return out, drift


@njit(cache=True)
def shoot_path(fam, prm, y0, L, h, stride):
    """Integrate to arclength L, storing every ``stride``-th state.

    Returns (samples, per-sample cumulative drift).
    """
    n = n_steps(L, h, stride)
    dt = L / n
    m = n // stride
    out = np.empty((m + 1, 8))
    drift_acc = np.zeros(m + 1)
    out[0] = y0
    y = _tup(y0)
    drift = 0.0
    for k in range(n):
        y, d = rk4_tuple(fam, prm, y, dt)
        drift += d
        if (k + 1) % stride == 0:
            q = (k + 1) // stride
            _arr(y, out[q])
            drift_acc[q] = drift
    return out, drift_acc


@njit(cache=True)
def first_jacobi_zero(fam, prm, y0, T, h):
    """Step until j changes sign (or hits zero) in (0, T].

    Returns (index of the step start, step size, state at the step start,
    found flag).  The tie j(T) == 0 counts as a zero.
    """
    n = n_steps(T, h, 1)
    dt = T / n
    y = y0.copy()
    z = np.empty(8)
    for k in range(n):
        rk4_step(fam, prm, y, dt, z)
        if z[6] == 0.0 or (y[6] != 0.0 and y[6] * z[6] < 0.0) or (k == 0 and z[6] < 0.0):
            return k, dt, y, True
        y[:] = z
    return n, dt, y, False


@njit(cache=True)
def substep(fam, prm, y, dt):
    """Advance ``y`` by a single RK4 step of size ``dt`` (dt <= h)."""
    z = np.empty(8)
    if dt == 0.0:
        return y.copy()
    rk4_step(fam, prm, y, dt, z)
    return z


@njit(cache=True)
def wrapped_residual(fam, prm, x, b, r):
    for i in range(3):
        r[i] = x[i] - b[i]
    if fam == FLAT:
        for i in range(2):
            r[i] -= prm[i] * math.floor(r[i] / prm[i] + 0.5)
        r[2] = 0.0
    return math.sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])


@njit(cache=True)
def _eval(fam, prm, p, e1, e2, b, th, L, h, r):
    y0 = initial_state(p, e1, e2, th)
    y, drift = shoot_end(fam, prm, y0, L, h)
    res = wrapped_residual(fam, prm, y[0:3], b, r)
    return y, res


@njit(cache=True)
def newton_shoot(fam, prm, p, e1, e2, b, th, L, h, maxit, tol, Lmin, Lmax):
    """Solve exp_p(L v(th)) = b for (th, L) by damped Gauss-Newton.

    The Jacobian columns are the co-integrated Jacobi field j(L) N x T
    (angle) and the arrival tangent T (length).  Status codes are the
    NEWTON_* constants.  Returns (th, L, residual, iterations, status,
    final state).
    """
    r = np.empty(3)
    rt = np.empty(3)
    n = np.empty(3)
    y, res = _eval(fam, prm, p, e1, e2, b, th, L, h, r)
    it = 0
    status = NEWTON_MAXITER
    step_cap_th = 0.25
    slow = 0
    while it < maxit:
        if res < tol:
            status = NEWTON_CONVERGED
            break
        it += 1
        x = y[0:3]
        normal(fam, prm, x, n)
        T0 = y[3]
        T1 = y[4]
        T2 = y[5]
        jL = y[6]
        # N x T scaled by j
        a0 = jL * (n[1] * T2 - n[2] * T1)
        a1 = jL * (n[2] * T0 - n[0] * T2)
        a2 = jL * (n[0] * T1 - n[1] * T0)
        A11 = a0 * a0 + a1 * a1 + a2 * a2
        A12 = a0 * T0 + a1 * T1 + a2 * T2
        A22 = T0 * T0 + T1 * T1 + T2 * T2
        g1 = a0 * r[0] + a1 * r[1] + a2 * r[2]
        g2 = T0 * r[0] + T1 * r[1] + T2 * r[2]
        mu = 1e-13 * (A11 + A22)
        A11 += mu
        A22 += mu
        det = A11 * A22 - A12 * A12
        if det <= 0.0:
            status = NEWTON_STALLED
            break
        dth = -(A22 * g1 - A12 * g2) / det
        dL = -(A11 * g2 - A12 * g1) / det
        if abs(dth) > step_cap_th:
            s = step_cap_th / abs(dth)
            dth *= s
            dL *= s
        capL = max(0.25 * L, 0.05)
        if abs(dL) > capL:
            s = capL / abs(dL)
            dth *= s
            dL *= s
        if L + dL > Lmax or L + dL <= Lmin:
            # the solution this start is heading for lies outside the window
            status = NEWTON_OUT_OF_RANGE
            break
        lam = 1.0
        accepted = False
        for _ in range(14):
            th_new = th + lam * dth
            L_new = L + lam * dL
            if L_new > Lmin and L_new <= Lmax:
                y_new, res_new = _eval(fam, prm, p, e1, e2, b, th_new, L_new, h, rt)
                if res_new < res:
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            status = NEWTON_STALLED
            break
        step = abs(th_new - th) + abs(L_new - L)
        if res_new > 0.9 * res:
            slow += 1
        else:
            slow = 0
        th = th_new
        L = L_new
        y = y_new
        res = res_new
        for i in range(3):
            r[i] = rt[i]
        if step < 1e-15 or (slow >= 4 and res >= tol):
            status = NEWTON_CONVERGED if res < tol else NEWTON_STALLED
            break
    else:
        if res < tol:
            status = NEWTON_CONVERGED
    if res < tol:
        status = NEWTON_CONVERGED
    return th, L, res, it, status, y


@njit(cache=True)
def build_fan(fam, prm, p, e1, e2, n, L, h, stride):
    """Shoot ``n`` evenly spaced directions; return positions and j values."""
    m = n_steps(L, h, stride) // stride
    P = np.empty((n, m + 1, 3))
    J = np.empty((n, m + 1))
    for i in range(n):
        th = 2.0 * math.pi * i / n
        y0 = initial_state(p, e1, e2, th)
        path, drift = shoot_path(fam, prm, y0, L, h, stride)
        for k in range(m + 1):
            P[i, k, 0] = path[k, 0]
            P[i, k, 1] = path[k, 1]
            P[i, k, 2] = path[k, 2]
            J[i, k] = path[k, 6]
    return P, J


@njit(cache=True)
def fan_distances(fam, prm, P, b, kmax):
    n = P.shape[0]
    D = np.full((n, P.shape[1]), np.inf)
    r = np.empty(3)
    for i in range(n):
        for k in range(1, kmax + 1):
            D[i, k] = wrapped_residual(fam, prm, P[i, k], b, r)
    return D


@njit(cache=True)
def fan_seeds(D, J, dth, dt, kmin, kmax, factor):
    """Grid local minima of D (circular in angle) inside their sample cell.

    Returns an (m, 2) integer array of (angle index, time index) sorted by D.
    """
    n = D.shape[0]
    cand_i = []
    cand_k = []
    cand_d = []
    for i in range(n):
        ip = (i + 1) % n
        im = (i - 1) % n
        for k in range(max(kmin, 1), kmax + 1):
            d = D[i, k]
            radius = factor * (abs(J[i, k]) * dth + dt)
            if d > radius:
                continue
            ok = True
            for kk in range(k - 1, k + 2):
                if kk < 1 or kk > kmax:
                    continue
                if D[im, kk] < d or D[ip, kk] < d:
                    ok = False
                    break
                if kk != k and D[i, kk] < d:
                    ok = False
                    break
            if ok:
                cand_i.append(i)
                cand_k.append(k)
                cand_d.append(d)
    m = len(cand_i)
    out = np.empty((m, 2), dtype=np.int64)
    order = np.argsort(np.array(cand_d)) if m > 0 else np.empty(0, dtype=np.int64)
    for q in range(m):
        out[q, 0] = cand_i[order[q]]
        out[q, 1] = cand_k[order[q]]
    return out


@njit(cache=True)
def ray_seeds(D, J, dth, dt, kmin, kmax, factor):
    """Local minima of D along each ray, without the angular test.

    Used where neighbouring basins merge (near caustics), so that every ray
    passing close to the target contributes a start value.
    """
    n = D.shape[0]
    cand_i = []
    cand_k = []
    cand_d = []
    for i in range(n):
        for k in range(max(kmin, 1), kmax + 1):
            d = D[i, k]
            if d > factor * (abs(J[i, k]) * dth + dt):
                continue
            if k > 1 and D[i, k - 1] < d:
                continue
            if k < kmax and D[i, k + 1] < d:
                continue
            cand_i.append(i)
            cand_k.append(k)
            cand_d.append(d)
    m = len(cand_i)
    out = np.empty((m, 2), dtype=np.int64)
    order = np.argsort(np.array(cand_d)) if m > 0 else np.empty(0, dtype=np.int64)
    for q in range(m):
        out[q, 0] = cand_i[order[q]]
        out[q, 1] = cand_k[order[q]]
    return out
