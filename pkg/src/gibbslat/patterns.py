"""Point patterns and the two observation schemes.

``F1`` observations carry (site, displacement) pairs with both the site and the
displaced point inside the window, together with every displaced point that
falls in the window (needed to evaluate interactions near the border).
``F2`` observations carry only the displaced points in the window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Window


@dataclass(frozen=True)
class PointPattern:
    points: np.ndarray
    window: Window

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, self.window.dimension)
        if len(pts) and not np.all(self.window.contains(pts)):
            raise ValueError("pattern has points outside its window")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class Observation:
    framework: str
    window: Window
    shift: np.ndarray
    points: np.ndarray
    sites: np.ndarray | None = None
    displacements: np.ndarray | None = None
    point_index: np.ndarray | None = None

    def __post_init__(self):
        if self.framework not in ("F1", "F2"):
            raise ValueError(f"framework must be F1 or F2, got {self.framework!r}")
        d = self.window.dimension
        pts = np.asarray(self.points, dtype=float).reshape(-1, d)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "shift", np.asarray(self.shift, dtype=float).reshape(d))
        if len(pts) and not np.all(self.window.contains(pts)):
            raise ValueError("observed points must lie in the window")
        if self.framework == "F1":
            if self.sites is None or self.displacements is None:
                raise ValueError("F1 observations need sites and displacements")
            sites = np.asarray(self.sites, dtype=float).reshape(-1, d)
            disp = np.asarray(self.displacements, dtype=float).reshape(-1, d)
            if len(sites) != len(disp):
                raise ValueError("sites and displacements differ in length")
            if len(sites) and not (np.all(self.window.contains(sites))
                                   and np.all(self.window.contains(sites + disp))):
                raise ValueError("F1 pairs must have site and displaced point in the window")
            object.__setattr__(self, "sites", sites)
            object.__setattr__(self, "displacements", disp)
            if self.point_index is None:
                object.__setattr__(self, "point_index", match_points(sites + disp, pts))

    @property
    def dimension(self) -> int:
        return self.window.dimension

    @property
    def pattern(self) -> PointPattern:
        return PointPattern(self.points, self.window)

    def as_f2(self) -> "Observation":
        return Observation("F2", self.window, self.shift, self.points)


def match_points(targets: np.ndarray, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Index in ``points`` of each target (which must be present up to ``tol``)."""
    if len(targets) == 0:
        return np.zeros(0, dtype=np.int64)
    from scipy.spatial import cKDTree

    dist, idx = cKDTree(points).query(targets)
    if np.any(dist > tol):
        raise ValueError("F1 displaced points missing from the observed point set")
    return idx.astype(np.int64)


def observe(sites: np.ndarray, displacements: np.ndarray, shift, window: Window):
    """Clip a full configuration to ``window``: returns ``(F1, F2)`` observations."""
    pts = sites + displacements
    in_pts = window.contains(pts)
    pairs = window.contains(sites) & in_pts
    f2_idx = np.flatnonzero(in_pts)
    points = pts[f2_idx]
    # position of each pair's point inside the F2 array
    lookup = np.full(len(sites), -1, dtype=np.int64)
    lookup[f2_idx] = np.arange(len(f2_idx))
    f1 = Observation("F1", window, shift, points, sites[pairs], displacements[pairs],
                     lookup[pairs])
    f2 = Observation("F2", window, shift, points)
    return f1, f2
