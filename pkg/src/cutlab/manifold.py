"""Surface catalog: metric data, Gaussian curvature and tangent frames.

Four families are supported.  Sphere, ellipsoid and torus of revolution are
handled as implicit surfaces in R^3 (points are ambient 3-vectors); the flat
torus lives in its chart (points are 2-vectors reduced modulo the periods).
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import DomainError


class Family(str, enum.Enum):
    SPHERE = "sphere"
    ELLIPSOID = "ellipsoid"
    TORUS = "torus"
    FLAT_TORUS = "flat_torus"


_CODES = {
    Family.SPHERE: K.SPHERE,
    Family.ELLIPSOID: K.ELLIPSOID,
    Family.TORUS: K.TORUS,
    Family.FLAT_TORUS: K.FLAT,
}

# parameter names per family, in order
PARAM_NAMES = {
    Family.SPHERE: ("radius",),
    Family.ELLIPSOID: ("a", "b", "c"),
    Family.TORUS: ("R", "r"),
    Family.FLAT_TORUS: ("a", "b"),
}


@dataclass(frozen=True)
class Tolerances:
    """Numeric thresholds shared by all pipelines.

    Lengths are in surface units, angles in radians.
    """

    surface_residual: float = 1e-10
    frame_fallback: float = 1e-6
    energy_drift: float = 1e-7
    jacobi_bisection: float = 1e-10
    newton_tol: float = 1e-10
    newton_maxiter: int = 50
    member_residual: float = 1e-6
    dedup_angle: float = 1e-3
    dedup_length: float = 1e-4
    continuum_length: float = 1e-6
    closure_angle: float = 1e-3
    cut_shortfall: float = 1e-5
    cut_bisection: float = 1e-6
    conjugacy_rel: float = 1e-3
    minimal_slack: float = 1e-5
    opposition_angle: float = 1e-3
    landing: float = 1e-4
    cut_locus_margin: float = 1e-3
    local_min_width: float = 1e-4
    n_starts: int = 64


@dataclass(frozen=True)
class SurfaceSpec:
    """One catalog surface together with its integration defaults.

    Parameters
    ----------
    family : Family
    params : tuple of float
        Shape parameters in the order of ``PARAM_NAMES[family]``.
    h : float
        RK4 step size.
    horizon : float, optional
        Conjugate-time horizon T_max; defaults to four diameter estimates.
    diameter : float, optional
        Override for the heuristic diameter estimate.
    backend : {"auto", "ode"}
        ``"ode"`` forces the flat torus through the shooting pipeline
        instead of its lattice formulas.
    """

    family: Family
    params: tuple
    h: float = 1e-3
    horizon: float | None = None
    diameter: float | None = None
    backend: str = "auto"
    tol: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        params = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", params)
        names = PARAM_NAMES[fam]
        if len(params) != len(names):
            raise DomainError(f"{fam.value} needs parameters {names}, got {params}")
        if not all(math.isfinite(v) and v > 0 for v in params):
            raise DomainError(f"{fam.value} parameters must be positive: {params}")
        if fam is Family.ELLIPSOID and not params[0] >= params[1] >= params[2]:
            raise DomainError("ellipsoid semi-axes must satisfy a >= b >= c")
        if fam is Family.TORUS and not params[0] > params[1]:
            raise DomainError("torus of revolution requires R > r")
        if not self.h > 0:
            raise DomainError("step size h must be positive")
        if self.backend not in ("auto", "ode"):
            raise DomainError(f"unknown backend {self.backend!r}")

    # constructors ---------------------------------------------------------

    @classmethod
    def sphere(cls, radius=1.0, **kw):
        return cls(Family.SPHERE, (radius,), **kw)

    @classmethod
    def ellipsoid(cls, a, b, c, **kw):
        return cls(Family.ELLIPSOID, (a, b, c), **kw)

    @classmethod
    def torus(cls, R=2.0, r=1.0, **kw):
        return cls(Family.TORUS, (R, r), **kw)

    @classmethod
    def flat_torus(cls, a=1.0, b=1.0, **kw):
        return cls(Family.FLAT_TORUS, (a, b), **kw)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    # derived data ---------------------------------------------------------

    @property
    def code(self):
        return _CODES[self.family]

    @property
    def kparams(self):
        """Parameter array in the layout the compiled kernels expect."""
        out = np.zeros(3)
        out[: len(self.params)] = self.params
        return out

    @property
    def is_flat(self):
        return self.family is Family.FLAT_TORUS

    @property
    def analytic(self):
        """True when the exact lattice backend is used."""
        return self.is_flat and self.backend == "auto"

    @property
    def diameter_estimate(self):
        if self.diameter is not None:
            return float(self.diameter)
        p = self.params
        if self.family is Family.SPHERE:
            return math.pi * p[0]
        if self.family is Family.FLAT_TORUS:
            return 0.5 * math.hypot(p[0], p[1])
        if self.family is Family.TORUS:
            return math.pi * (p[0] + p[1])
        return math.pi * p[0]

    @property
    def t_max(self):
        return self.horizon if self.horizon is not None else 4.0 * self.diameter_estimate

    @property
    def dim(self):
        return 2 if self.is_flat else 3

    def label(self):
        args = ",".join(f"{v:g}" for v in self.params)
        return f"{self.family.value}({args})"


def catalog():
    """The reference surfaces exercised by the verification suite."""
    return {
        "sphere": SurfaceSpec.sphere(1.0),
        "ellipsoid": SurfaceSpec.ellipsoid(1.0, 1.0, 0.8),
        "torus": SurfaceSpec.torus(2.0, 1.0),
        "flat_torus": SurfaceSpec.flat_torus(1.0, 1.0),
    }


# points ---------------------------------------------------------------------


def canonical(surface, x):
    """Reduce flat-torus chart coordinates into [0, a) x [0, b)."""
    x = np.asarray(x, dtype=float)
    if not surface.is_flat:
        return x
    a, b = surface.params
    u = np.mod(x[..., 0], a)
    v = np.mod(x[..., 1], b)
    # np.mod can round up to the period itself for tiny negative inputs
    u = np.where(u >= a, 0.0, u)
    v = np.where(v >= b, 0.0, v)
    return np.stack([u, v], axis=-1)


def residual(surface, x):
    """Approximate distance of an ambient point from the surface."""
    if surface.is_flat:
        return 0.0
    x = np.asarray(x, dtype=float)
    g = np.empty(3)
    H = np.empty((3, 3))
    f = K.implicit(surface.code, surface.kparams, x, g, H)
    return abs(f) / np.linalg.norm(g)


def as_point(surface, x):
    """Validate a point and return it in canonical form."""
    x = np.asarray(x, dtype=float)
    if x.shape != (surface.dim,):
        raise DomainError(f"{surface.family.value} points have {surface.dim} coordinates, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("point has non-finite coordinates")
    if surface.is_flat:
        return canonical(surface, x)
    res = residual(surface, x)
    if res > surface.tol.surface_residual:
        raise DomainError(f"point {x.tolist()} is off the surface (residual {res:.3e})")
    return x


def project(surface, x):
    """Move an ambient point onto the surface (identity on the flat chart)."""
    x = np.array(x, dtype=float)
    if surface.is_flat:
        return canonical(surface, x)
    K.project_point(surface.code, surface.kparams, x)
    return x


def pad(surface, x):
    """Ambient 3-vector form used by the kernels."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] == 3:
        return x
    return np.concatenate([x, np.zeros(x.shape[:-1] + (1,))], axis=-1)


def unpad(surface, x):
    x = np.asarray(x, dtype=float)
    return x[..., :2] if surface.is_flat else x


def from_params(surface, u, v):
    """Point from surface coordinates.

    Sphere and ellipsoid take (colatitude, longitude); the torus of
    revolution takes (longitude, tube angle) with tube angle 0 on the outer
    equator; the flat torus takes chart coordinates.
    """
    p = surface.params
    if surface.family in (Family.SPHERE, Family.ELLIPSOID):
        a, b, c = (p[0],) * 3 if surface.family is Family.SPHERE else p
        return np.array([a * math.sin(u) * math.cos(v), b * math.sin(u) * math.sin(v), c * math.cos(u)])
    if surface.family is Family.TORUS:
        R, r = p
        w = R + r * math.cos(v)
        return np.array([w * math.cos(u), w * math.sin(u), r * math.sin(v)])
    return canonical(surface, np.array([u, v], dtype=float))


def tube_angle(surface, x):
    """Tube angle of a torus point (0 on the outer equator)."""
    R, _ = surface.params
    rho = math.hypot(x[0], x[1])
    return math.atan2(x[2], rho - R)


def grid(surface, n):
    """Uniform n x n parameter grid covering the surface."""
    pts = []
    for i in range(n):
        for j in range(n):
            if surface.family in (Family.SPHERE, Family.ELLIPSOID):
                pts.append(from_params(surface, (i + 0.5) * math.pi / n, 2 * math.pi * j / n))
            elif surface.family is Family.TORUS:
                pts.append(from_params(surface, 2 * math.pi * i / n, 2 * math.pi * j / n))
            else:
                a, b = surface.params
                pts.append(np.array([a * i / n, b * j / n]))
    return np.array(pts)


def random_points(surface, n, rng):
    """``n`` points drawn from a seeded ``numpy.random.Generator``."""
    if surface.family in (Family.SPHERE, Family.ELLIPSOID):
        z = rng.normal(size=(n, 3))
        z /= np.linalg.norm(z, axis=1)[:, None]
        axes = np.array(surface.params if surface.family is Family.ELLIPSOID else surface.params * 3)
        pts = z * axes
        for x in pts:
            K.project_point(surface.code, surface.kparams, x)
        return pts
    if surface.family is Family.TORUS:
        ang = rng.uniform(0, 2 * math.pi, size=(n, 2))
        return np.array([from_params(surface, u, v) for u, v in ang])
    a, b = surface.params
    return np.column_stack([rng.uniform(0, a, n), rng.uniform(0, b, n)])


# metric data ----------------------------------------------------------------


def unit_normal(surface, x):
    n = np.empty(3)
    K.normal(surface.code, surface.kparams, pad(surface, x), n)
    return n


def curvature_at(surface, p):
    """Gaussian curvature K(p) in 1/length^2."""
    p = as_point(surface, p)
    return float(K.gauss_curvature(surface.code, surface.kparams, pad(surface, p)))


@dataclass(frozen=True)
class TangentFrame:
    base: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    def direction(self, theta):
        return math.cos(theta) * self.e1 + math.sin(theta) * self.e2

    def angle_of(self, v):
        """Angle of a tangent vector in this frame, in [0, 2*pi)."""
        return math.atan2(float(np.dot(v, self.e2)), float(np.dot(v, self.e1))) % (2 * math.pi)


def _raw_frame(surface, p):
    if surface.is_flat:
        return np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    n = unit_normal(surface, p)
    e1 = None
    for axis in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])):
        w = axis - np.dot(axis, n) * n
        s = np.linalg.norm(w)
        if s >= surface.tol.frame_fallback:
            e1 = w / s
            break
    e2 = np.cross(n, e1)
    e2 /= np.linalg.norm(e2)
    return e1, e2


def frame_at(surface, p):
    """Deterministic orthonormal frame at p.

    e1 is the normalized tangential projection of the x-axis (y-axis when
    that projection is shorter than ``tol.frame_fallback``) and
    e2 = normal x e1.
    """
    p = as_point(surface, p)
    e1, e2 = _raw_frame(surface, p)
    return TangentFrame(p, unpad(surface, e1), unpad(surface, e2))


def kernel_frame(surface, p):
    """(p, e1, e2) as padded 3-vectors for the kernels."""
    p = pad(surface, p)
    e1, e2 = _raw_frame(surface, p)
    return p, e1, e2


def angle_between(u, v):
    """Angle in [0, pi] between two tangent vectors of equal dimension."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    c = float(np.dot(u, v))
    s = float(np.linalg.norm(np.cross(u, v))) if u.shape[-1] == 3 else abs(float(u[0] * v[1] - u[1] * v[0]))
    return math.atan2(s, c)
