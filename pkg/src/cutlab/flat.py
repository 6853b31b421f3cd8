"""Exact lattice formulas for the flat torus R^2 / (aZ x bZ).

Geodesics are straight lines in the chart, so connecting geodesics are the
lattice translates of the chart displacement and the cut locus of any point
is the boundary of its Voronoi cell.
"""

import math

import numpy as np


def reduce(d, a, b):
    """Representative of a chart displacement in [-a/2, a/2) x [-b/2, b/2)."""
    d = np.asarray(d, dtype=float)
    out = d.copy()
    out[..., 0] -= a * np.floor(d[..., 0] / a + 0.5)
    out[..., 1] -= b * np.floor(d[..., 1] / b + 0.5)
    return out


def translates(a, b, d, max_len):
    """All lattice translates w = d + (m a, n b) with |w| <= max_len.

    Sorted by (length, angle in [0, 2 pi)).
    """
    d = reduce(d, a, b)
    M = int(math.ceil(max_len / a)) + 1
    N = int(math.ceil(max_len / b)) + 1
    m, n = np.meshgrid(np.arange(-M, M + 1), np.arange(-N, N + 1), indexing="ij")
    w = np.stack([d[0] + m.ravel() * a, d[1] + n.ravel() * b], axis=1)
    L = np.hypot(w[:, 0], w[:, 1])
    keep = (L <= max_len) & (L > 0)
    w, L = w[keep], L[keep]
    th = np.mod(np.arctan2(w[:, 1], w[:, 0]), 2 * math.pi)
    order = np.lexsort((th, L))
    return w[order], L[order], th[order]


def distance(a, b, x, y):
    d = reduce(np.asarray(y, dtype=float) - np.asarray(x, dtype=float), a, b)
    best = math.inf
    for m in (-1, 0, 1):
        for n in (-1, 0, 1):
            best = min(best, math.hypot(d[0] + m * a, d[1] + n * b))
    return best


def distances_to(a, b, x, ys):
    """Vectorized distance from one point to many."""
    d = reduce(np.asarray(ys, dtype=float) - np.asarray(x, dtype=float), a, b)
    best = np.full(d.shape[0], np.inf)
    for m in (-1, 0, 1):
        for n in (-1, 0, 1):
            best = np.minimum(best, np.hypot(d[:, 0] + m * a, d[:, 1] + n * b))
    return best


def cut_time(a, b, theta):
    """Exit time of the unit ray from the Voronoi cell of the origin."""
    v = np.array([math.cos(theta), math.sin(theta)])
    best = math.inf
    for m in (-1, 0, 1):
        for n in (-1, 0, 1):
            if m == 0 and n == 0:
                continue
            w = np.array([m * a, n * b])
            s = float(v @ w)
            if s > 1e-15:
                best = min(best, float(w @ w) / (2 * s))
    return best


def lattice_loops(a, b, max_len):
    """Loop vectors up to sign, sorted by (length, angle)."""
    w, L, th = translates(a, b, np.zeros(2), max_len)
    # one representative per +-w pair: angle in [0, pi)
    keep = th < math.pi - 1e-12
    return w[keep], L[keep], th[keep]
