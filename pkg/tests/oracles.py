"""Independent reference computations used by the tests.

Nothing here calls the package's quadrature or neighbour-search code.
"""

import math

import numpy as np
from scipy import special


def _interval_mass(family, theta1, a, b, lo=None, hi=None):
    """Mass of one coordinate of the move law on ``[a, b]``."""
    if family == "gaussian":
        # coordinate density sqrt(theta/pi) exp(-theta x^2)
        s = math.sqrt(theta1)
        return 0.5 * (special.erf(s * b) - special.erf(s * a))
    if family == "exponential":
        a, b = np.maximum(a, 0.0), np.maximum(b, 0.0)
        return np.exp(-theta1 * a) - np.exp(-theta1 * b)
    a, b = np.clip(a, lo, hi), np.clip(b, lo, hi)
    return (b - a) / (hi - lo)


def _coord_density(family, theta1, x, lo=None, hi=None):
    if family == "gaussian":
        return math.sqrt(theta1 / math.pi) * np.exp(-theta1 * x * x)
    if family == "exponential":
        return np.where(x >= 0, theta1 * np.exp(-theta1 * x), 0.0)
    return np.where((x >= lo) & (x <= hi), 1.0 / (hi - lo), 0.0)


def line_partition(family, theta1, theta2, edges, hardcore_r, site, others, x_range,
                   n_lines=40_000, support=None, clip=None):
    """Z = int lambda_1(x) exp(-theta2 . S2(site + x)) 1{no hard core} dx in d = 2.

    Along every vertical line the interaction term is piecewise constant with
    breakpoints where the line crosses a circle around a neighbour; each piece
    is integrated exactly in the second coordinate, and a midpoint rule with
    ``n_lines`` lines integrates the first.  ``clip`` optionally restricts
    ``site + x`` to a box ``(lo, hi)``.
    """
    site = np.asarray(site, float)
    others = np.asarray(others, float).reshape(-1, 2) - site
    edges = np.asarray(edges, float)
    theta2 = np.asarray(theta2, float)
    radii = np.concatenate([[hardcore_r] if hardcore_r > 0 else [], edges])
    slo, shi = (support if support is not None else (None, None))
    a, b = x_range
    h = (b - a) / n_lines
    x1 = a + h * (np.arange(n_lines) + 0.5)
    y_lo, y_hi = (slo[1], shi[1]) if support is not None else (-np.inf, np.inf)
    if family == "exponential":
        y_lo = 0.0
    if clip is not None:
        clo, chi = np.asarray(clip[0], float) - site, np.asarray(clip[1], float) - site
        keep = (x1 >= clo[0]) & (x1 < chi[0])
        x1 = x1[keep]
        y_lo, y_hi = max(y_lo, clo[1]), min(y_hi, chi[1])
    # crossing points of each line with each circle
    brk = [np.full(len(x1), y_lo), np.full(len(x1), y_hi)]
    for c in others:
        for rad in radii:
            disc = rad * rad - (x1 - c[0]) ** 2
            root = np.sqrt(np.where(disc > 0, disc, 0.0))
            for sgn in (-1, 1):
                brk.append(np.where(disc > 0, np.clip(c[1] + sgn * root, y_lo, y_hi), y_lo))
    brk = np.sort(np.stack(brk, axis=1), axis=1)
    lo_b, hi_b = brk[:, :-1], brk[:, 1:]
    fin_lo = np.where(np.isfinite(lo_b), lo_b, -1e300)
    fin_hi = np.where(np.isfinite(hi_b), hi_b, 1e300)
    mid = 0.5 * (np.clip(fin_lo, -1e6, 1e6) + np.clip(fin_hi, -1e6, 1e6))
    # interaction factor on each piece, from its midpoint
    logf = np.zeros(mid.shape)
    dead = np.zeros(mid.shape, dtype=bool)
    for c in others:
        dist = np.sqrt((x1[:, None] - c[0]) ** 2 + (mid - c[1]) ** 2)
        dead |= dist < hardcore_r
        lower = hardcore_r
        for k, e in enumerate(edges):
            inband = (dist >= lower) & (dist <= e) if k == 0 else (dist > lower) & (dist <= e)
            logf -= theta2[k] * inband
            lower = e
    lo_s = None if support is None else slo[1]
    hi_s = None if support is None else shi[1]
    mass = _interval_mass(family, theta1, lo_b, hi_b, lo_s, hi_s)
    inner = np.sum(np.where(dead, 0.0, np.exp(logf)) * mass, axis=1)
    w1 = _coord_density(family, theta1, x1, None if support is None else slo[0],
                        None if support is None else shi[0])
    return float(h * np.sum(w1 * inner))


def strauss_energy(points, R, theta2, hardcore_r=0.0):
    """Direct O(n^2) Strauss energy; inf on a hard-core breach."""
    p = np.asarray(points, float)
    if len(p) < 2:
        return 0.0
    d = np.linalg.norm(p[:, None] - p[None], axis=-1)[np.triu_indices(len(p), 1)]
    if np.any(d < hardcore_r):
        return math.inf
    return float(theta2 * np.sum(d <= R))
