"""Command-line front end.

Usage::

    cutlab <command> [--config FILE] [--key=value ...]

Every command writes its artifacts to the ``out`` directory.  Exit codes:
0 success, 1 invalid input, 2 numerical failure, 3 invariant violation in
``verify-all``.
"""

import argparse
import os
import sys

from . import plotting, report
from .config import load, parse_overrides
from .cutlocus import CSV_COLUMNS, radii_report, sample_cut_locus
from .errors import ConfigError, CutlabError, DomainError, InvariantViolation, NumericalError
from .geodesic_engine import conjugate_time, shoot
from .klingenberg import (
    F_COLUMNS,
    closed_geodesic_check,
    manifold_radius,
    two_geodesics_characterization,
    verdicts,
    _same_point,
)

COMMANDS = ("geodesic", "cutlocus", "radii", "dichotomy", "characterize", "radius", "verify-all")


def _require(cfg, *keys):
    for k in keys:
        if getattr(cfg, k) is None:
            raise ConfigError(f"missing required key {k!r}", key=k)


def _path(cfg, name):
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, name)


def cmd_geodesic(cfg):
    _require(cfg, "p")
    s = cfg.surface
    length = cfg.length if cfg.length is not None else s.diameter_estimate
    g = shoot(s, cfg.p, cfg.theta, length)
    kappa = conjugate_time(s, cfg.p, cfg.theta, t_max=length)
    head = cfg.header()
    report.write_csv(_path(cfg, "geodesic.csv"), g.columns(), g.to_rows(), head)
    result = {
        "start": g.start,
        "theta": g.theta,
        "length": g.length,
        "step": g.step,
        "n_samples": len(g.t),
        "endpoint": g.endpoint,
        "drift": g.drift,
        "conjugate_time": kappa,
        "columns": g.columns(),
    }
    report.write_json(_path(cfg, "geodesic.json"), "geodesic", head, result)
    plotting.geodesic_svg(s, g, _path(cfg, "geodesic.svg"), head, conjugate_time=kappa)
    return result


def _minimal_curves(surface, p, samples, k=8):
    # a few minimal geodesics from p to its cut points, for the figure
    ok = [x for x in samples if x.ok]
    step = max(1, len(ok) // k)
    out = []
    for x in ok[::step]:
        g = shoot(surface, p, x.theta, x.sigma)
        out.append(g.chart if surface.is_flat else g.points)
    return out


def cmd_cutlocus(cfg):
    _require(cfg, "p")
    s = cfg.surface
    samples = sample_cut_locus(s, cfg.p, cfg.n_dirs)
    head = cfg.header()
    ok = [x for x in samples if x.ok]
    report.write_csv(_path(cfg, "cutlocus.csv"), CSV_COLUMNS, [x.row() for x in ok], head)
    kap = [x.kappa for x in ok if x.kappa is not None]
    result = {
        "p": cfg.p,
        "n_dirs": len(samples),
        "n_valid": len(ok),
        "n_essential": sum(bool(x.essential) for x in ok),
        "sigma_min": min((x.sigma for x in ok), default=None),
        "sigma_max": max((x.sigma for x in ok), default=None),
        "kappa_min": min(kap, default=None),
        "errors": [{"theta": x.theta, "error": x.error} for x in samples if not x.ok],
        "samples": [
            {
                "theta": x.theta,
                "sigma": x.sigma,
                "kappa": x.kappa,
                "point": x.point,
                "count": x.count,
                "continuum": bool(x.continuum),
                "essential": bool(x.essential),
            }
            for x in ok
        ],
    }
    if not ok:
        raise NumericalError("every direction of the atlas failed", module="cutlocus", sample=samples[0].error)
    report.write_json(_path(cfg, "cutlocus.json"), "cutlocus", head, result)
    plotting.atlas_svg(s, cfg.p, samples, _path(cfg, "cutlocus.svg"), head, geodesics=_minimal_curves(s, cfg.p, samples))
    return result


def cmd_radii(cfg):
    _require(cfg, "p")
    r = radii_report(cfg.surface, cfg.p, cfg.n_dirs, L_max=cfg.L_max)
    rec = r.record()
    report.write_json(_path(cfg, "radii.json"), "radii", cfg.header(), rec)
    return rec


def cmd_dichotomy(cfg):
    _require(cfg, "p")
    s = cfg.surface
    q = cfg.p if cfg.q is None else cfg.q
    atlas, vs = verdicts(s, cfg.p, q, cfg.n_dirs)
    head = cfg.header()
    report.write_csv(_path(cfg, "fatlas.csv"), F_COLUMNS, atlas.rows(), head)
    closed = None
    if _same_point(s, atlas.p, atlas.q) < 1e-12 and vs:
        closed = closed_geodesic_check(s, atlas.p, vs[0], cfg.n_dirs).record()
    result = {
        "atlas": atlas.record(),
        "verdicts": [v.record() for v in vs],
        "all_hold": all(v.holds for v in vs),
        "closed_geodesic": closed,
    }
    report.write_json(_path(cfg, "dichotomy.json"), "dichotomy", head, result)
    curves = {"alpha": [], "gamma": []}
    for v in vs:
        for th in v.alpha_angles:
            g = shoot(s, atlas.p, th, v.d_px)
            curves["alpha"].append(g.chart if s.is_flat else g.points)
        if v.d_qx > 0:
            for th in v.gamma_angles:
                g = shoot(s, atlas.q, th, v.d_qx)
                curves["gamma"].append(g.chart if s.is_flat else g.points)
    plotting.dichotomy_svg(s, atlas, vs, curves, _path(cfg, "dichotomy.svg"), head)
    return result


def cmd_characterize(cfg):
    _require(cfg, "p")
    r = two_geodesics_characterization(cfg.surface, cfg.p, cfg.n_dirs, grid_n=cfg.char_grid, L_max=cfg.L_max)
    rec = r.record()
    report.write_json(_path(cfg, "characterize.json"), "characterize", cfg.header(), rec)
    return rec


def cmd_radius(cfg):
    r = manifold_radius(cfg.surface, grid_n=cfg.grid_n)
    rec = r.record()
    report.write_json(_path(cfg, "radius.json"), "radius", cfg.header(), rec)
    return rec


def cmd_verify_all(cfg):
    from .acceptance import run_all

    res = run_all(seed=cfg.seed, jobs=cfg.jobs, echo=print)
    head = {"seed": cfg.seed, "suite": "catalog"}
    rec = res.record()
    report.write_json(_path(cfg, "verify.json"), "verify", head, rec)
    if not res.passed:
        failed = ", ".join(str(c.id) for c in res.criteria if not c.passed)
        raise InvariantViolation(f"acceptance criteria failed: {failed}")
    return rec


HANDLERS = {
    "geodesic": cmd_geodesic,
    "cutlocus": cmd_cutlocus,
    "radii": cmd_radii,
    "dichotomy": cmd_dichotomy,
    "characterize": cmd_characterize,
    "radius": cmd_radius,
    "verify-all": cmd_verify_all,
}


def parser():
    ap = argparse.ArgumentParser(
        prog="cutlab",
        allow_abbrev=False,
        description="Geodesics, cut loci and two-point dichotomy checks on surfaces.",
        epilog="Any configuration key may be given as --key=value; command-line values override the config file.",
    )
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--jobs", type=int, default=None, help="worker-pool size (default: available cores)")
    return ap


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args, rest = parser().parse_known_args(argv)
    try:
        overrides = parse_overrides(rest)
        if args.jobs is not None:
            overrides["jobs"] = str(args.jobs)
        if args.command == "verify-all":
            # the suite runs on the built-in catalog; only run-level keys apply
            overrides.setdefault("family", "sphere")
        cfg = load(args.config, overrides)
        HANDLERS[args.command](cfg)
    except ConfigError as exc:
        key = f" (key: {exc.key})" if exc.key else ""
        print(f"cutlab: invalid input: {exc}{key}", file=sys.stderr)
        return 1
    except DomainError as exc:
        print(f"cutlab: invalid input: {exc}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"cutlab: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        where = ", ".join(f"{k}={v}" for k, v in (("module", exc.module), ("sample", exc.sample)) if v is not None)
        print(f"cutlab: numerical failure: {exc}" + (f" [{where}]" if where else ""), file=sys.stderr)
        return 2
    except CutlabError as exc:
        print(f"cutlab: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
