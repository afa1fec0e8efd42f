"""Variational estimator for Framework-2 data (bare points, no site labels).

Integrating by parts over the move support turns the one-site DLR identity into

    E sum_y [ d_k g(y) - g(y) * d_k E_theta(y) ] = 0,

for smooth ``g`` vanishing on the translated support boundaries, where
``E_theta(y) = theta1 . S1(y - i) + theta2 . S2(y, rest)`` is the energy of the
point at ``y``.  The equation is linear in theta when ``d_k S1`` does not depend
on the unknown site: uniform moves (no S1 term) and exponential moves on the
orthant (``d_k S1 = 1``).  The Strauss indicator is replaced by a C1 taper so
``d_k S2`` exists.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .conditional import GibbsModel
from .errors import ConfigError, IdentifiabilityError, InsufficientDataError
from .geometry import Window, erode
from .inference import EstimatorConfig, FitResult
from .interactions import InteractionModel
from .patterns import Observation

#: taper width as a fraction of the interaction range
TAPER_FRACTION = 0.05


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t), 6.0 - 12.0 * t


def taper_width(inter: InteractionModel, width: float | None = None) -> float:
    return TAPER_FRACTION * inter.range if width is None else float(width)


def band_taper(inter: InteractionModel, dist: np.ndarray, width: float | None = None):
    """Smoothed band indicators ``tau_b(dist)`` with first and second derivatives.

    The indicator of ``dist <= e`` is replaced by ``1 - s((dist - e + w/2) / w)``
    with ``s`` the cubic smoothstep, a ramp of width ``w`` centred on the edge.
    Returns three arrays of shape ``dist.shape + (p2,)``.
    """
    w = taper_width(inter, width)
    dist = np.asarray(dist, dtype=float)
    below, d1, d2 = [], [], []
    for e in inter.band_edges:
        s, ds, dds = _smoothstep((dist - e + 0.5 * w) / w)
        inside = np.abs(dist - e) < 0.5 * w
        below.append(1.0 - s)
        d1.append(np.where(inside, -ds / w, 0.0))
        d2.append(np.where(inside, -dds / w ** 2, 0.0))
    below, d1, d2 = (np.stack(a, axis=-1) for a in (below, d1, d2))
    # band b = below edge b minus below edge b-1
    tau, t1, t2 = below.copy(), d1.copy(), d2.copy()
    tau[..., 1:] -= below[..., :-1]
    t1[..., 1:] -= d1[..., :-1]
    t2[..., 1:] -= d2[..., :-1]
    return tau, t1, t2


def tapered_s2(inter: InteractionModel, y: np.ndarray, points: np.ndarray, skip=None,
               width: float | None = None):
    """Tapered statistic at each ``y`` with its gradient and the diagonal of its Hessian.

    Returns ``(s, grad, hdiag)`` of shapes ``(n, p2)``, ``(n, d, p2)``, ``(n, d, p2)``.
    ``skip[j]`` is the index in ``points`` of ``y[j]`` itself (or -1).
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n, d = y.shape
    p2 = inter.p2
    s = np.zeros((n, p2))
    grad = np.zeros((n, d, p2))
    hdiag = np.zeros((n, d, p2))
    if len(points) == 0 or n == 0:
        return s, grad, hdiag
    tree = cKDTree(points)
    nb = tree.query_ball_point(y, inter.range + 0.5 * taper_width(inter, width))
    rows = np.repeat(np.arange(n), [len(v) for v in nb])
    cols = np.fromiter((j for v in nb for j in v), dtype=np.int64, count=len(rows))
    if skip is not None:
        keep = cols != np.asarray(skip)[rows]
        rows, cols = rows[keep], cols[keep]
    delta = y[rows] - points[cols]
    dist = np.linalg.norm(delta, axis=1)
    if np.any(dist == 0.0):
        raise ConfigError("coincident points: the tapered statistic is not differentiable")
    tau, t1, t2 = band_taper(inter, dist, width)
    u = delta / dist[:, None]
    for b in range(p2):
        s[:, b] = np.bincount(rows, tau[:, b], minlength=n)
        for k in range(d):
            grad[:, k, b] = np.bincount(rows, t1[:, b] * u[:, k], minlength=n)
            hk = t2[:, b] * u[:, k] ** 2 + t1[:, b] * (1.0 - u[:, k] ** 2) / dist
            hdiag[:, k, b] = np.bincount(rows, hk, minlength=n)
    return s, grad, hdiag


def default_psi(gm: GibbsModel, shift, inner: Window) -> Callable:
    """Product bump vanishing on every translate of the support boundary and on
    the border of ``inner``.  Returns ``psi(y) -> (value, gradient)``."""
    lat = gm.lattice
    if not lat.is_axis_aligned:
        raise ConfigError("the default window function needs an axis-aligned lattice")
    a = np.diag(lat.matrix).astype(float)
    u = np.asarray(shift, dtype=float)
    mv = gm.move
    if mv.family == "uniform":
        faces = [mv.support.lo, mv.support.hi]
    elif mv.family == "exponential":
        faces = [np.zeros(gm.dimension)]
    else:
        raise ConfigError("variational estimation covers uniform and exponential moves only")
    lo, hi = inner.lo, inner.hi
    span = hi - lo

    def psi(y):
        y = np.atleast_2d(y)
        f = np.ones_like(y)
        df = np.zeros_like(y)
        for c in faces:
            ang = math.pi * (y - u - c) / a
            g, dg = np.sin(ang) ** 2, (math.pi / a) * np.sin(2 * ang)
            df = df * g + f * dg
            f = f * g
        ang = math.pi * (y - lo) / span
        g, dg = np.sin(ang) ** 2, (math.pi / span) * np.sin(2 * ang)
        inside = (y >= lo) & (y <= hi)
        g, dg = np.where(inside, g, 0.0), np.where(inside, dg, 0.0)
        df = df * g + f * dg
        f = f * g
        val = np.prod(f, axis=1)
        grad = np.empty_like(y)
        for k in range(y.shape[1]):
            others = np.prod(np.delete(f, k, axis=1), axis=1)
            grad[:, k] = df[:, k] * others
        return val, grad

    return psi


def variational_system(obs: Observation, gm: GibbsModel, psi: Callable | None = None,
                        width: float | None = None):
    """Coefficient matrix ``C`` (rows indexed by parameter component then
    coordinate) and right-hand side ``a`` with ``C theta = a``; plus the point count."""
    mv = gm.move
    if mv.family not in ("uniform", "exponential"):
        raise ConfigError(f"variational estimation is not available for {mv.family} moves; "
                          "use uniform or exponential moves or Framework-1 data")
    inter = gm.interaction
    if inter.hardcore_r > 0:
        raise ConfigError("variational estimation needs hardcore_r = 0 (smooth energy)")
    pts = obs.points
    inner = erode(obs.window, inter.range + 0.5 * taper_width(inter, width))
    use = np.flatnonzero(np.atleast_1d(inner.contains(pts))) if len(pts) else np.zeros(0, int)
    if len(use) == 0:
        raise InsufficientDataError("no point lies in the window eroded by the tapered range", 0)
    if psi is None:
        psi = default_psi(gm, obs.shift, inner)
    y = pts[use]
    val, dpsi = psi(y)
    _, g2, h2 = tapered_s2(inter, y, pts, skip=use, width=width)
    d, p1, p2 = gm.dimension, gm.p1, gm.p2
    p = p1 + p2
    C = np.zeros((p, d, p))
    a = np.zeros((p, d))
    # the derivative of the energy along coordinate k, per parameter component
    dE = np.concatenate([np.ones((len(y), d, p1)), g2], axis=2)
    for l in range(p):
        if l < p1:
            V = val[:, None] * np.ones((1, d))
            dV = dpsi
        else:
            b = l - p1
            V = val[:, None] * g2[:, :, b]
            dV = dpsi * g2[:, :, b] + val[:, None] * h2[:, :, b]
        a[l] = dV.sum(axis=0)
        C[l] = np.einsum("nk,nkj->kj", V, dE)
    return C.reshape(p * d, p), a.reshape(p * d), len(use)


def fit_variational(obs: Observation, family: GibbsModel, cfg: EstimatorConfig | None = None,
                    psi: Callable | None = None, width: float | None = None) -> FitResult:
    """Least-squares solution of the stacked variational equations."""
    cfg = cfg or EstimatorConfig()
    C, a, n = variational_system(obs, family, psi, width)
    scale = np.abs(C).max() if C.size else 0.0
    sv = np.linalg.svd(C, compute_uv=False) if scale > 0 else np.zeros(1)
    if scale == 0 or sv.min() <= 1e-10 * sv.max():
        raise IdentifiabilityError("the variational system is rank deficient "
                                   "(no interacting pairs carry information)")
    # equilibrate: the S2 rows carry a 1/width scale that would swamp the S1 rows
    norm = np.linalg.norm(C, axis=1)
    wt = np.where(norm > 0, 1.0 / np.where(norm > 0, norm, 1.0), 0.0)
    theta, *_ = np.linalg.lstsq(C * wt[:, None], a * wt, rcond=None)
    resid = C @ theta - a
    tv = family.theta(theta)
    names = [f"{s}[{k}]" for s in (["s1"] * family.p1 + [f"s2:{b}" for b in range(family.p2)])
             for k in range(family.dimension)]
    vol = obs.window.volume
    return FitResult(tv, float(resid @ resid), n, True,
                     {nm: float(r) / vol for nm, r in zip(names, resid)},
                     {**cfg.to_dict(), "taper_width": taper_width(family.interaction, width)},
                     "variational", "least squares")
