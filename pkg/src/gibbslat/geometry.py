"""Lattices, fundamental domains, box windows and shifted-lattice enumeration.

Windows are axis-aligned boxes.  Membership is half-open, ``lower <= y < upper``,
so that adjacent boxes tile space without double counting.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class LatticeSpec:
    """Full-rank lattice generated by the rows of ``basis``."""

    basis: tuple

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if b.shape[0] != b.shape[1]:
            raise ValueError(f"basis must be square, got shape {b.shape}")
        if abs(np.linalg.det(b)) < 1e-12:
            raise ValueError("basis is not full rank")
        object.__setattr__(self, "basis", tuple(map(tuple, b.tolist())))

    @classmethod
    def cubic(cls, d: int, spacing: float = 1.0) -> "LatticeSpec":
        return cls(tuple(tuple(spacing if i == j else 0.0 for j in range(d)) for i in range(d)))

    @property
    def dimension(self) -> int:
        return len(self.basis)

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.array(self.basis, dtype=float)

    @cached_property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    @property
    def is_axis_aligned(self) -> bool:
        m = self.matrix
        return bool(np.all(m[~np.eye(len(m), dtype=bool)] == 0.0))

    @cached_property
    def size(self) -> float:
        """Length of the shortest nonzero lattice vector (brute-force search)."""
        m = self.matrix
        shortest = float(np.min(np.linalg.norm(m, axis=1)))
        # any lattice vector no longer than `shortest` has bounded coefficients
        kmax = int(math.ceil(np.linalg.norm(self.inverse, 2) * shortest))
        rng = range(-kmax, kmax + 1)
        for c in itertools.product(rng, repeat=self.dimension):
            if any(c):
                shortest = min(shortest, float(np.linalg.norm(np.asarray(c) @ m)))
        return shortest

    @property
    def cell_volume(self) -> float:
        return float(abs(np.linalg.det(self.matrix)))

    def in_fundamental_domain(self, u) -> bool:
        t = np.asarray(u, dtype=float) @ self.inverse
        return bool(np.all((t >= 0.0) & (t < 1.0)))


@dataclass(frozen=True)
class Window:
    """Axis-aligned box ``[lower, upper)``; ``empty`` when a side is inverted."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi):
            raise ValueError("lower and upper must have the same length")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, half_width: float, d: int = 2) -> "Window":
        return cls((-half_width,) * d, (half_width,) * d)

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def is_empty(self) -> bool:
        return any(lo > hi for lo, hi in zip(self.lower, self.upper))

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.upper)

    @property
    def volume(self) -> float:
        if self.is_empty:
            return 0.0
        return float(np.prod(self.hi - self.lo))

    def contains(self, points) -> np.ndarray | bool:
        """Half-open membership test; vectorised over leading axes."""
        if self.is_empty:
            p = np.asarray(points, dtype=float)
            return False if p.ndim == 1 else np.zeros(p.shape[:-1], dtype=bool)
        p = np.asarray(points, dtype=float)
        inside = np.all((p >= self.lo) & (p < self.hi), axis=-1)
        return bool(inside) if p.ndim == 1 else inside

    def contains_window(self, other: "Window") -> bool:
        if other.is_empty:
            return True
        return bool(np.all(other.lo >= self.lo) and np.all(other.hi <= self.hi))

    def erode(self, r: float) -> "Window":
        return erode(self, r)

    def dilate(self, r: float) -> "Window":
        return Window(self.lo - r, self.hi + r)

    def margin_inside(self, outer: "Window") -> float:
        """Smallest distance between a side of ``self`` and the matching side of ``outer``."""
        return float(min(np.min(self.lo - outer.lo), np.min(outer.hi - self.hi)))

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper)}

    @classmethod
    def from_dict(cls, data: dict) -> "Window":
        return cls(tuple(data["lower"]), tuple(data["upper"]))


def erode(w: Window, r: float) -> Window:
    """Erosion ``{y : B(y, r) inside w}`` of a box, i.e. each side shrunk by ``r``."""
    if r < 0:
        raise ValueError("erosion radius must be nonnegative")
    return Window(w.lo + r, w.hi - r)


def shifted_sites(lat: LatticeSpec, u, w: Window, return_indices: bool = False):
    """Points ``i + u`` of the shifted lattice that fall in ``w``.

    Sites are ordered lexicographically on their integer lattice coordinates.
    """
    d = lat.dimension
    u = np.asarray(u, dtype=float).reshape(d)
    if w.is_empty:
        empty = np.zeros((0, d))
        return (empty, np.zeros((0, d), dtype=np.int64)) if return_indices else empty
    corners = np.array(list(itertools.product(*zip(w.lower, w.upper)))) - u
    coef = corners @ lat.inverse
    kmin = np.floor(coef.min(axis=0)).astype(np.int64) - 1
    kmax = np.ceil(coef.max(axis=0)).astype(np.int64) + 1
    grids = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(kmin, kmax)], indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=1)
    pos = idx @ lat.matrix + u
    keep = w.contains(pos)
    idx, pos = idx[keep], pos[keep]
    # meshgrid with indexing="ij" already yields lexicographic order
    if return_indices:
        return pos, idx
    return pos


def sample_shift(lat: LatticeSpec, rng) -> np.ndarray:
    """Uniform draw from the fundamental domain."""
    t = np.asarray(rng.random(lat.dimension), dtype=float)
    return t @ lat.matrix


def border_indicator(i, x, w: Window, m: float, range_: float):
    """Border correction: 1 iff ``i`` is in ``w`` eroded by ``m + range_`` and
    ``i + x`` is in ``w`` eroded by ``range_``.  Vectorised over leading axes."""
    i = np.asarray(i, dtype=float)
    x = np.asarray(x, dtype=float)
    inner = erode(w, m + range_).contains(i)
    outer = erode(w, range_).contains(i + x)
    out = np.logical_and(inner, outer)
    return int(out) if np.ndim(out) == 0 else out.astype(np.int8)
