"""Exponential-family Papangelou conditional intensities of one site.

For a site ``i`` (a point of the shifted lattice), a move ``x`` and the other
points ``others`` the unnormalised intensity is

    lambda(i, x, others) = exp(-theta1 . S1(x) - c(theta1) - theta2 . S2(i + x, others)),

and ``Lambda = lambda / Z_i`` with ``Z_i`` its integral over the move support.
``Lambda_n`` additionally carries the border indicator in numerator and
denominator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSiteError, DomainError
from .geometry import LatticeSpec, Window, border_indicator, erode
from .interactions import InteractionModel, band_of
from .moves import MoveModel, QuadratureRule, s1

#: sub-cells per axis for quadrature cells cut by an interaction sphere (d <= 2)
REFINE_SPLIT = 8


@dataclass(frozen=True)
class ThetaVector:
    theta1: tuple = ()
    theta2: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "theta1", tuple(float(t) for t in np.atleast_1d(self.theta1))
                           if np.size(self.theta1) else ())
        object.__setattr__(self, "theta2", tuple(float(t) for t in np.atleast_1d(self.theta2))
                           if np.size(self.theta2) else ())

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.theta1 + self.theta2, dtype=float)

    def to_list(self) -> list:
        return list(self.theta1 + self.theta2)


@dataclass(frozen=True)
class GibbsModel:
    move: MoveModel
    interaction: InteractionModel
    lattice: LatticeSpec = field(default=None)

    def __post_init__(self):
        if self.lattice is None:
            object.__setattr__(self, "lattice", LatticeSpec.cubic(self.move.dimension))
        if self.lattice.dimension != self.move.dimension:
            raise ValueError("lattice and move dimensions differ")

    @property
    def dimension(self) -> int:
        return self.move.dimension

    @property
    def p1(self) -> int:
        return self.move.p1

    @property
    def p2(self) -> int:
        return self.interaction.p2

    @property
    def p(self) -> int:
        return self.p1 + self.p2

    @property
    def range(self) -> float:
        return self.interaction.range

    def theta(self, theta) -> ThetaVector:
        """Coerce a flat vector or a ThetaVector to a validated ThetaVector."""
        if isinstance(theta, ThetaVector):
            tv = theta
        else:
            v = np.atleast_1d(np.asarray(theta, dtype=float))
            if len(v) != self.p:
                raise ValueError(f"theta has {len(v)} entries, model needs {self.p}")
            tv = ThetaVector(v[: self.p1], v[self.p1:])
        if len(tv.theta1) != self.p1 or len(tv.theta2) != self.p2:
            raise ValueError("theta does not match the model's parameter layout")
        return tv

    def with_theta(self, theta) -> "GibbsModel":
        tv = self.theta(theta)
        return GibbsModel(self.move.with_theta(tv.theta1),
                          self.interaction.with_theta(tv.theta2), self.lattice)

    def to_dict(self) -> dict:
        mv = {"family": self.move.family, "dimension": self.dimension}
        if self.move.support is not None:
            mv["support"] = self.move.support.to_dict()
        return {"move": mv, "interaction": self.interaction.to_dict(),
                "lattice": [list(b) for b in self.lattice.basis]}


def _s2_at(gm: GibbsModel, y: np.ndarray, others: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Band counts ``(n, p2)`` and hard-core flags ``(n,)`` at positions ``y``."""
    y = np.atleast_2d(y)
    others = np.asarray(others, dtype=float).reshape(-1, gm.dimension)
    inter = gm.interaction
    counts = np.zeros((len(y), inter.p2), dtype=np.int64)
    hc = np.zeros(len(y), dtype=bool)
    if len(others) == 0:
        return counts, hc
    lo, hi = y.min(axis=0) - inter.range, y.max(axis=0) + inter.range
    others = others[np.all((others >= lo) & (others <= hi), axis=1)]
    # chunk to keep the distance matrix small
    step = max(1, 2_000_000 // max(1, len(others)))
    for a in range(0, len(y), step):
        dist = np.linalg.norm(y[a:a + step, None, :] - others[None, :, :], axis=-1)
        band = band_of(inter, dist)
        hc[a:a + step] = np.any(band < 0, axis=1)
        for b in range(inter.p2):
            counts[a:a + step, b] = np.sum(band == b, axis=1)
    return counts, hc


def joint_statistic(gm: GibbsModel, i, x, others) -> tuple[np.ndarray, bool | np.ndarray]:
    """``(S1(x), S2(i + x, others))`` concatenated, plus the hard-core flag."""
    x = np.asarray(x, dtype=float)
    stat1 = s1(gm.move, x)
    counts, hc = _s2_at(gm, np.asarray(i, dtype=float) + np.atleast_2d(x), others)
    out = np.concatenate([np.atleast_2d(stat1), counts], axis=1)
    if x.ndim == 1:
        return out[0], bool(hc[0])
    return out, hc


def log_lambda(gm: GibbsModel, theta, i, x, others):
    tv = gm.theta(theta)
    x = np.asarray(x, dtype=float)
    xs = np.atleast_2d(x)
    inside = np.atleast_1d(gm.move.in_support(xs))
    out = np.full(len(xs), -np.inf)
    if np.any(inside):
        model = gm.with_theta(tv)
        s, hc = joint_statistic(model, i, xs[inside], others)
        val = -(s @ tv.vector) - model.move.log_normalizer()
        out[inside] = np.where(hc, -np.inf, val)
    return float(out[0]) if x.ndim == 1 else out


def cut_cells(gm: GibbsModel, i, others, quad: QuadratureRule) -> np.ndarray:
    """Mask of the cells of a tensor rule that a hard-core or band-edge sphere
    around a neighbour may cross (all False when ``quad`` has no cell size)."""
    cut = np.zeros(len(quad.nodes), dtype=bool)
    if quad.cell is None:
        return cut
    d = gm.dimension
    others = np.asarray(others, dtype=float).reshape(-1, d)
    inter = gm.interaction
    radii = np.array([r for r in (inter.hardcore_r,) + tuple(inter.band_edges) if r > 0])
    y = np.asarray(i, dtype=float) + quad.nodes
    half_diag = 0.5 * float(np.linalg.norm(quad.cell))
    for c in others:
        dist = np.linalg.norm(y - c, axis=1)
        near = dist <= radii[-1] + half_diag
        if np.any(near):
            gap = np.abs(dist[near, None] - radii[None, :]).min(axis=1)
            cut[np.flatnonzero(near)[gap <= half_diag]] = True
    return cut


def node_values(gm: GibbsModel, theta, i, others, quad: QuadratureRule,
                split: int | None = None) -> np.ndarray:
    """Unnormalised conditional density at the nodes of ``quad``, with the
    interaction factor of every cut cell replaced by its move-density-weighted
    mean over ``split**d`` sub-cells.

    The interaction factor jumps across the spheres, which limits a plain
    midpoint rule to slow, irregular convergence.  Averaging the factor only in
    the cut cells, while keeping the move density at the node, removes most of
    that error and leaves the rule unchanged wherever the factor is constant.
    """
    vals = np.exp(log_lambda(gm, theta, i, quad.nodes, others))
    cut = cut_cells(gm, i, others, quad)
    if not np.any(cut):
        return vals
    d = gm.dimension
    split = split or (REFINE_SPLIT if d <= 2 else 4)
    offs = (np.arange(split) + 0.5) / split - 0.5
    sub = np.stack([g.ravel() for g in np.meshgrid(*[offs] * d, indexing="ij")], axis=1)
    fine = (quad.nodes[cut][:, None, :] + sub[None] * quad.cell).reshape(-1, d)
    lam = np.exp(log_lambda(gm, theta, i, fine, others)).reshape(-1, split ** d)
    tv = gm.theta(theta)
    dens = np.exp(log_lambda(gm, tv.theta1 + (0.0,) * gm.p2, i, fine, [])).reshape(lam.shape)
    tot = dens.sum(axis=1)
    ok = tot > 0
    node_dens = np.exp(log_lambda(gm, tv.theta1 + (0.0,) * gm.p2, i, quad.nodes[cut], []))
    vals[cut] = np.where(ok, node_dens * lam.sum(axis=1) / np.where(ok, tot, 1.0), 0.0)
    return vals


def partition_z(gm: GibbsModel, theta, i, others, quad: QuadratureRule,
                window: Window | None = None) -> float:
    """Quadrature value of ``Z_i`` (see ``node_values``).  With ``window``,
    only moves with ``i + x`` inside it count (the border-corrected denominator)."""
    vals = node_values(gm, theta, i, others, quad)
    if window is not None:
        vals = vals * window.contains(np.asarray(i, dtype=float) + quad.nodes)
    z = float(np.dot(quad.weights, vals))
    if not z > 0.0:
        raise DegenerateSiteError(f"site {np.asarray(i).tolist()} has no admissible move")
    return z


def papangelou(gm: GibbsModel, theta, i, x, others, quad: QuadratureRule):
    z = partition_z(gm, theta, i, others, quad)
    return np.exp(log_lambda(gm, theta, i, x, others)) / z


def papangelou_bordered(gm: GibbsModel, theta, i, x, others, quad: QuadratureRule,
                        w: Window, m_n: float):
    i = np.asarray(i, dtype=float)
    if not erode(w, m_n + gm.range).contains(i):
        x = np.asarray(x, dtype=float)
        return 0.0 if x.ndim == 1 else np.zeros(len(x))
    inner = erode(w, gm.range)
    z = partition_z(gm, theta, i, others, quad, window=inner)
    b = border_indicator(i, x, w, m_n, gm.range)
    return b * np.exp(log_lambda(gm, theta, i, x, others)) / z


def effective_range(gm: GibbsModel, theta1: float | None = None) -> float:
    """Distance beyond which a site cannot influence a location: interaction
    range plus the support diameter (tail radius for unbounded moves)."""
    mv = gm.move
    if mv.bounded:
        diam = float(np.linalg.norm(mv.support.hi - mv.support.lo))
    else:
        diam = mv.tail_radius(theta1)
    return gm.range + diam if math.isfinite(diam) else math.inf


def check_support(gm: GibbsModel, x) -> None:
    if not np.all(gm.move.in_support(x)):
        raise DomainError("move outside support")
