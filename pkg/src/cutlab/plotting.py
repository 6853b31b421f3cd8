"""Deterministic SVG figures drawn in surface coordinates.

Sphere and ellipsoid use (longitude, colatitude), the torus of revolution
(longitude, tube angle) and the flat torus its chart.  Element ids are
seeded from a fixed salt and the date stamp is dropped, so identical inputs
give byte-identical files.  The effective configuration is embedded as an
XML comment.
"""

import io
import json
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .manifold import Family  # noqa: E402

SALT = "cutlab"
ESSENTIAL = "#c0392b"
ORDINARY = "#2c6fbb"
GEODESIC = "#555555"


def coords(surface, pts):
    """2D plotting coordinates of surface points, shape (n, 2)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if surface.is_flat:
        return pts[:, :2].copy()
    if surface.family is Family.TORUS:
        R, _ = surface.params
        lon = np.arctan2(pts[:, 1], pts[:, 0])
        rho = np.hypot(pts[:, 0], pts[:, 1])
        return np.column_stack([lon, np.arctan2(pts[:, 2], rho - R)])
    a, b, c = surface.params * 3 if surface.family is Family.SPHERE else surface.params
    lon = np.arctan2(pts[:, 1] / b, pts[:, 0] / a)
    colat = np.arccos(np.clip(pts[:, 2] / c, -1.0, 1.0))
    return np.column_stack([lon, colat])


def _periods(surface):
    if surface.is_flat:
        return surface.params
    if surface.family is Family.TORUS:
        return (2 * math.pi, 2 * math.pi)
    return (2 * math.pi, math.inf)


def break_seams(surface, xy):
    """Insert NaN rows where a path wraps across a coordinate seam."""
    if len(xy) < 2:
        return xy
    per = np.array(_periods(surface))
    jump = np.any(np.abs(np.diff(xy, axis=0)) > 0.5 * per, axis=1)
    if not jump.any():
        return xy
    out = []
    for k in range(len(xy)):
        out.append(xy[k])
        if k < len(jump) and jump[k]:
            out.append([np.nan, np.nan])
    return np.array(out)


def _axes(surface):
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    if surface.is_flat:
        a, b = surface.params
        ax.set_xlabel("u")
        ax.set_ylabel("v")
        ax.set_aspect("equal")
        ax.add_patch(plt.Rectangle((0, 0), a, b, fill=False, lw=0.6, ls=":", color="0.6"))
    elif surface.family is Family.TORUS:
        ax.set_xlabel("longitude")
        ax.set_ylabel("tube angle")
        ax.set_xlim(-math.pi, math.pi)
        ax.set_ylim(-math.pi, math.pi)
    else:
        ax.set_xlabel("longitude")
        ax.set_ylabel("colatitude")
        ax.set_xlim(-math.pi, math.pi)
        ax.set_ylim(math.pi, 0)
    ax.set_title(surface.label(), fontsize=9)
    return fig, ax


def _save(fig, path, config):
    buf = io.StringIO()
    with plt.rc_context({"svg.hashsalt": SALT, "svg.fonttype": "none"}):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    text = buf.getvalue()
    note = json.dumps(config, sort_keys=True).replace("--", "- -")
    head, sep, rest = text.partition("?>\n")
    if sep:
        text = f"{head}{sep}<!-- cutlab config: {note} -->\n{rest}"
    else:
        text = f"<!-- cutlab config: {note} -->\n{text}"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _curve(surface, ax, pts, **kw):
    xy = break_seams(surface, coords(surface, pts))
    return ax.plot(xy[:, 0], xy[:, 1], **kw)


def _flat_points(surface, p, samples):
    # the Voronoi boundary is drawn around p in the unreduced chart
    th = np.array([s.theta for s in samples])
    sig = np.array([s.sigma for s in samples])
    return np.asarray(p)[None, :] + sig[:, None] * np.column_stack([np.cos(th), np.sin(th)])


def atlas_svg(surface, p, samples, path, config, geodesics=()):
    """Cut locus of p coloured by the essential flag, with overlaid geodesics.

    ``geodesics`` is a sequence of point arrays (e.g. minimal geodesics to
    selected cut points).
    """
    ok = [s for s in samples if s.ok]
    if not ok:
        raise ValueError("no valid cut samples to draw")
    fig, ax = _axes(surface)
    for g in geodesics:
        _curve(surface, ax, g, color=GEODESIC, lw=0.6, alpha=0.7)
    if surface.is_flat:
        xy = _flat_points(surface, p, ok)
    else:
        xy = coords(surface, np.array([s.point for s in ok]))
    closed = np.vstack([xy, xy[:1]])
    line = closed if surface.is_flat else break_seams(surface, closed)
    ax.plot(line[:, 0], line[:, 1], color=ORDINARY, lw=1.0)
    ess = np.array([s.essential for s in ok])
    sig = np.array([s.sigma for s in ok])
    kap = np.array([np.nan if s.kappa is None else s.kappa for s in ok])
    label = f"cut points, sigma in [{sig.min():.4f}, {sig.max():.4f}]"
    ax.scatter(xy[~ess, 0], xy[~ess, 1], s=8, color=ORDINARY, label=label, zorder=3)
    if ess.any():
        kk = kap[ess]
        kk = kk[np.isfinite(kk)]
        klabel = f", kappa = {kk.min():.4f}" if kk.size else ""
        ax.scatter(xy[ess, 0], xy[ess, 1], s=24, color=ESSENTIAL, marker="D", label=f"essential ({int(ess.sum())}){klabel}", zorder=4)
    pxy = coords(surface, p)
    ax.scatter(pxy[:, 0], pxy[:, 1], s=30, color="k", marker="*", label="p", zorder=5)
    if np.isfinite(kap).any():
        ax.plot([], [], " ", label=f"min kappa = {np.nanmin(kap):.4f}")
    ax.legend(fontsize=7, loc="upper right")
    _save(fig, path, config)


def geodesic_svg(surface, g, path, config, conjugate_time=None):
    """One geodesic with its start point and, if any, first conjugate point."""
    fig, ax = _axes(surface)
    pts = g.chart if surface.is_flat else g.points
    _curve(surface, ax, pts, color=ORDINARY, lw=1.0, label=f"theta = {g.theta:.4f}, length = {g.length:.4f}")
    s = coords(surface, g.start)
    ax.scatter(s[:, 0], s[:, 1], s=30, color="k", marker="*", label="start", zorder=5)
    if conjugate_time is not None:
        k = min(int(round(conjugate_time / g.step)), len(g.t) - 1)
        c = coords(surface, pts[k])
        ax.scatter(c[:, 0], c[:, 1], s=24, color=ESSENTIAL, marker="D", label=f"kappa = {conjugate_time:.4f}", zorder=4)
    ax.legend(fontsize=7, loc="upper right")
    _save(fig, path, config)


def dichotomy_svg(surface, atlas, verdicts, curves, path, config):
    """Cut locus of p, the minima of F and the geodesics alpha, gamma to them.

    ``curves`` maps ``"alpha"`` and ``"gamma"`` to lists of point arrays.
    """
    fig, ax = _axes(surface)
    ok = [s for s in atlas.samples if s.ok]
    xy = _flat_points(surface, atlas.p, ok) if surface.is_flat else coords(surface, np.array([s.point for s in ok]))
    closed = np.vstack([xy, xy[:1]])
    line = closed if surface.is_flat else break_seams(surface, closed)
    ax.plot(line[:, 0], line[:, 1], color=ORDINARY, lw=1.0, label="cut locus of p")
    for k, g in enumerate(curves.get("alpha", ())):
        _curve(surface, ax, g, color=GEODESIC, lw=0.8, label="alpha: p to x0" if k == 0 else None)
    for k, g in enumerate(curves.get("gamma", ())):
        _curve(surface, ax, g, color="#27ae60", lw=0.8, ls="--", label="gamma: q to x0" if k == 0 else None)
    for v in verdicts:
        c = coords(surface, v.x0)
        colour = ESSENTIAL if v.branch_conjugate else "#8e44ad"
        kind = "conjugate" if v.branch_conjugate else ("through" if v.branch_through else "VIOLATION")
        ax.scatter(c[:, 0], c[:, 1], s=30, color=colour, marker="D", zorder=4, label=f"x0 ({kind}), F = {v.F:.4f}, sigma = {v.d_px:.4f}")
    for pt, name, m in ((atlas.p, "p", "*"), (atlas.q, "q", "o")):
        c = coords(surface, pt)
        ax.scatter(c[:, 0], c[:, 1], s=30, color="k", marker=m, label=name, zorder=5)
    ax.legend(fontsize=6, loc="upper right")
    _save(fig, path, config)
