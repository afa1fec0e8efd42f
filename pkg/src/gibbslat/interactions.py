"""Pairwise finite-range interactions: Strauss hard-core and its piecewise version.

Distances are binned into bands ``[r, b_1], (b_1, b_2], ..., (b_{m-1}, R]`` where
``r`` is the hard-core radius.  A neighbour closer than ``r`` is a hard-core
violation (infinite energy); a distance of exactly ``r`` is allowed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree


@dataclass(frozen=True)
class InteractionModel:
    breakpoints: tuple
    hardcore_r: float = 0.0
    theta2: tuple = ()

    def __post_init__(self):
        bp = tuple(float(b) for b in np.atleast_1d(self.breakpoints))
        if not bp:
            raise ValueError("at least one band is required")
        if not 0.0 <= self.hardcore_r < bp[0]:
            raise ValueError("need 0 <= hardcore_r < first breakpoint")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "hardcore_r", float(self.hardcore_r))
        th = tuple(float(t) for t in np.atleast_1d(self.theta2)) if np.size(self.theta2) else ()
        if th and len(th) != len(bp):
            raise ValueError(f"theta2 has {len(th)} entries for {len(bp)} bands")
        object.__setattr__(self, "theta2", th)

    @classmethod
    def strauss(cls, R: float, hardcore_r: float = 0.0, theta2: float | None = None):
        return cls((R,), hardcore_r, () if theta2 is None else (theta2,))

    @property
    def kind(self) -> str:
        return "strauss" if len(self.breakpoints) == 1 else "piecewise"

    @property
    def p2(self) -> int:
        return len(self.breakpoints)

    @property
    def range(self) -> float:
        return self.breakpoints[-1]

    @property
    def band_edges(self) -> np.ndarray:
        return np.array(self.breakpoints)

    def with_theta(self, theta2) -> "InteractionModel":
        return replace(self, theta2=tuple(np.atleast_1d(theta2)))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "breakpoints": list(self.breakpoints),
                "hardcore_r": self.hardcore_r}


@dataclass(frozen=True)
class PairStatistic:
    counts: np.ndarray
    hardcore_violated: bool


def band_of(m: InteractionModel, dist) -> np.ndarray:
    """Band index per distance; -1 for hard-core, ``p2`` for out of range."""
    dist = np.asarray(dist, dtype=float)
    band = np.searchsorted(m.band_edges, dist, side="left")
    return np.where(dist < m.hardcore_r, -1, band)


def pair_statistic(m: InteractionModel, y, others) -> PairStatistic:
    y = np.asarray(y, dtype=float)
    others = np.asarray(others, dtype=float).reshape(-1, y.shape[-1])
    counts = np.zeros(m.p2, dtype=np.int64)
    if len(others) == 0:
        return PairStatistic(counts, False)
    diff = others - y
    near = np.all(np.abs(diff) <= m.range, axis=1)
    dist = np.sqrt(np.sum(diff[near] ** 2, axis=1))
    band = band_of(m, dist)
    counts += np.bincount(band[(band >= 0) & (band < m.p2)], minlength=m.p2)
    return PairStatistic(counts, bool(np.any(band < 0)))


def local_energy(m: InteractionModel, y, others) -> float:
    st = pair_statistic(m, y, others)
    if st.hardcore_violated:
        return math.inf
    return float(np.dot(m.theta2, st.counts))


def total_energy(m: InteractionModel, gamma) -> float:
    pts = np.asarray(gamma, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if pts.size else pts.reshape(0, 1)
    if len(pts) < 2:
        return 0.0
    pairs = cKDTree(pts).query_pairs(m.range, output_type="ndarray")
    if len(pairs) == 0:
        return 0.0
    dist = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1)
    band = band_of(m, dist)
    if np.any(band < 0):
        return math.inf
    counts = np.bincount(band[band < m.p2], minlength=m.p2)
    return float(np.dot(m.theta2, counts))
