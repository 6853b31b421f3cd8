"""Run configuration: key/value files with command-line overrides.

A configuration file holds one ``key = value`` pair per line; ``#`` starts
a comment.  Command-line ``--key=value`` pairs override the file, which in
turn overrides the defaults.  Point values are comma-separated numbers:
ambient coordinates (x, y, z) or surface coordinates (u, v) for the
embedded families (see ``manifold.from_params``), chart coordinates for the
flat torus.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError
from .manifold import PARAM_NAMES, Family, SurfaceSpec, Tolerances, as_point, from_params, project

FAMILY_ALIASES = {
    "sphere": Family.SPHERE,
    "ellipsoid": Family.ELLIPSOID,
    "torus": Family.TORUS,
    "torus_of_revolution": Family.TORUS,
    "flat_torus": Family.FLAT_TORUS,
    "flattorus": Family.FLAT_TORUS,
}

PARAM_DEFAULTS = {
    Family.SPHERE: {"radius": 1.0},
    Family.ELLIPSOID: {"a": 1.0, "b": 1.0, "c": 0.8},
    Family.TORUS: {"R": 2.0, "r": 1.0},
    Family.FLAT_TORUS: {"a": 1.0, "b": 1.0},
}

TOLERANCE_KEYS = {f.name: f.type for f in dataclasses.fields(Tolerances)}

# run-level keys and their parsers
RUN_KEYS = {
    "h": float,
    "T_max": float,
    "diameter": float,
    "backend": str,
    "p": str,
    "q": str,
    "theta": float,
    "length": float,
    "n_dirs": int,
    "L_max": float,
    "grid_n": int,
    "char_grid": int,
    "t": str,
    "seed": int,
    "out": str,
    "jobs": int,
}

SURFACE_KEYS = {"family", "radius", "a", "b", "c", "R", "r"}


@dataclass(frozen=True)
class RunConfig:
    """Effective configuration of one CLI run."""

    surface: SurfaceSpec
    p: np.ndarray | None = None
    q: np.ndarray | None = None
    theta: float = 0.0
    length: float | None = None
    n_dirs: int = 64
    L_max: float | None = None
    grid_n: int = 32
    char_grid: int = 16
    t: tuple = (0.5, 0.9)
    seed: int = 0
    out: str = "out"
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)
    raw: dict = field(default_factory=dict, compare=False)

    def header(self):
        """Provenance block: every effective key, sorted."""
        return dict(sorted(self.raw.items()))


def read_file(path):
    """Parse a key/value file into a dict of strings."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}", key="config") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value'", key=line)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{n}: empty key")
        out[key] = value
    return out


def parse_overrides(tokens):
    """``--key=value`` tokens into a dict."""
    out = {}
    for tok in tokens:
        if not tok.startswith("--") or "=" not in tok:
            raise ConfigError(f"override {tok!r} is not of the form --key=value", key=tok.lstrip("-"))
        key, value = tok[2:].split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _num(key, value, kind):
    try:
        if kind is int:
            v = float(value)
            if v != int(v):
                raise ValueError
            return int(v)
        if kind is float:
            v = float(value)
            if not math.isfinite(v):
                raise ValueError
            return v
    except ValueError:
        raise ConfigError(f"{key} must be {'an integer' if kind is int else 'a finite number'}, got {value!r}", key=key) from None
    return value


def _vector(key, value):
    try:
        return np.array([float(v) for v in value.replace(" ", "").split(",") if v != ""])
    except ValueError:
        raise ConfigError(f"{key} must be comma-separated numbers, got {value!r}", key=key) from None


def _point(surface, key, value):
    v = _vector(key, value)
    if not surface.is_flat and v.shape == (2,):
        v = from_params(surface, *v)
    if not surface.is_flat and v.shape == (3,):
        # small rounding in hand-written coordinates is projected away
        w = project(surface, v)
        if np.linalg.norm(w - v) > 1e-6:
            raise ConfigError(f"{key} = {value} is not on the surface", key=key)
        v = w
    try:
        return as_point(surface, v)
    except DomainError as exc:
        raise ConfigError(f"{key}: {exc}", key=key) from None


def build(values):
    """RunConfig from merged string values (CLI > file > defaults)."""
    values = dict(values)
    unknown = sorted(set(values) - SURFACE_KEYS - set(RUN_KEYS) - set(TOLERANCE_KEYS) - {"config"})
    if unknown:
        raise ConfigError(f"unknown configuration key {unknown[0]!r}", key=unknown[0])
    if "family" not in values or not values["family"]:
        raise ConfigError("missing required key 'family'", key="family")
    name = values["family"].strip().lower()
    if name not in FAMILY_ALIASES:
        raise ConfigError(f"unknown family {values['family']!r}; expected one of {sorted(set(FAMILY_ALIASES))}", key="family")
    fam = FAMILY_ALIASES[name]
    params = []
    for pname in PARAM_NAMES[fam]:
        params.append(_num(pname, values.get(pname, PARAM_DEFAULTS[fam][pname]), float))
    stray = sorted((SURFACE_KEYS - {"family"} - set(PARAM_NAMES[fam])) & set(values))
    if stray:
        raise ConfigError(f"key {stray[0]!r} is not a parameter of {fam.value}", key=stray[0])
    tol_kw = {k: _num(k, values[k], _kind(k)) for k in TOLERANCE_KEYS if k in values}
    kw = {}
    if "h" in values:
        kw["h"] = _num("h", values["h"], float)
    if "T_max" in values:
        kw["horizon"] = _num("T_max", values["T_max"], float)
    if "diameter" in values:
        kw["diameter"] = _num("diameter", values["diameter"], float)
    if "backend" in values:
        kw["backend"] = values["backend"]
    try:
        surface = SurfaceSpec(fam, tuple(params), tol=Tolerances(**tol_kw), **kw)
    except DomainError as exc:
        raise ConfigError(str(exc), key="family") from None
    run = {}
    for key in ("theta", "length", "L_max"):
        if key in values:
            run[key] = _num(key, values[key], float)
    for key in ("n_dirs", "grid_n", "char_grid", "seed", "jobs"):
        if key in values:
            run[key] = _num(key, values[key], int)
    for key in ("p", "q"):
        if key in values:
            run[key] = _point(surface, key, values[key])
    if "t" in values:
        run["t"] = tuple(float(v) for v in _vector("t", values["t"]))
    if "out" in values:
        run["out"] = values["out"]
    if run.get("jobs", 1) < 1:
        raise ConfigError("jobs must be at least 1", key="jobs")
    if run.get("n_dirs", 64) < 64:
        raise ConfigError("n_dirs must be at least 64", key="n_dirs")
    raw = _effective(surface, run)
    return RunConfig(surface=surface, raw=raw, **run)


def _kind(key):
    # dataclass field types are strings under postponed annotations
    t = TOLERANCE_KEYS[key]
    return int if t in ("int", int) else float


def _effective(surface, run):
    raw = {"family": surface.family.value}
    for name, v in zip(PARAM_NAMES[surface.family], surface.params):
        raw[name] = v
    raw["h"] = surface.h
    raw["T_max"] = surface.t_max
    raw["diameter"] = surface.diameter_estimate
    raw["backend"] = surface.backend
    raw.update(dataclasses.asdict(surface.tol))
    defaults = RunConfig(surface=surface)
    for f in dataclasses.fields(RunConfig):
        if f.name in ("surface", "raw", "jobs", "out"):
            continue
        v = run.get(f.name, getattr(defaults, f.name))
        if isinstance(v, np.ndarray):
            v = v.tolist()
        elif isinstance(v, tuple):
            v = list(v)
        raw[f.name] = v
    return raw


def load(path=None, overrides=()):
    """Merge defaults, an optional file and CLI overrides into a RunConfig."""
    values = {}
    if path is not None:
        values.update(read_file(path))
    values.update(parse_overrides(overrides) if not isinstance(overrides, dict) else overrides)
    return build(values)
