"""Move (mark) distributions: density, sufficient statistic, sampling, quadrature.

Three exponential-family move laws are supported:

``uniform``      uniform on a box support, no parameter;
``gaussian``     density proportional to ``exp(-theta1 * |x|^2)`` on R^d;
``exponential``  density proportional to ``exp(-theta1 * sum(x))`` on the positive orthant.

The log-partition constant is always the one that makes the density integrate to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .errors import DomainError
from .geometry import Window

FAMILIES = ("uniform", "gaussian", "exponential")

#: neglected probability mass when truncating an unbounded support
TAIL_MASS = 1e-8

#: nodes per dimension used when no resolution is given
DEFAULT_RESOLUTION = {"uniform": 60, "gaussian": 60, "exponential": 640}


@dataclass(frozen=True)
class MoveModel:
    family: str
    dimension: int
    theta1: tuple = ()
    support: Window | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown move family {self.family!r}; expected one of {FAMILIES}")
        theta1 = tuple(float(t) for t in np.atleast_1d(self.theta1)) if np.size(self.theta1) else ()
        object.__setattr__(self, "theta1", theta1)
        if self.family == "uniform":
            if self.support is None or self.support.is_empty or self.support.volume <= 0:
                raise ValueError("uniform moves need a non-degenerate box support")
            if self.support.dimension != self.dimension:
                raise ValueError("support dimension mismatch")
            if theta1:
                raise ValueError("uniform moves have no parameter")
        elif theta1 and (len(theta1) != 1 or not theta1[0] > 0):
            raise ValueError(f"{self.family} moves need a single positive theta1, got {theta1}")

    @classmethod
    def uniform(cls, lower, upper) -> "MoveModel":
        w = Window(tuple(np.atleast_1d(lower)), tuple(np.atleast_1d(upper)))
        return cls("uniform", w.dimension, (), w)

    @classmethod
    def gaussian(cls, d: int, theta1: float | None = None) -> "MoveModel":
        return cls("gaussian", d, () if theta1 is None else (theta1,))

    @classmethod
    def exponential(cls, d: int, theta1: float | None = None) -> "MoveModel":
        return cls("exponential", d, () if theta1 is None else (theta1,))

    @property
    def p1(self) -> int:
        return 0 if self.family == "uniform" else 1

    @property
    def bounded(self) -> bool:
        return self.family == "uniform"

    def with_theta(self, theta1) -> "MoveModel":
        return replace(self, theta1=tuple(np.atleast_1d(theta1)) if self.p1 else ())

    def _theta(self) -> float:
        if self.p1 == 0:
            return 0.0
        if not self.theta1:
            raise ValueError(f"{self.family} move model has no theta1 set")
        return self.theta1[0]

    def in_support(self, x) -> np.ndarray | bool:
        x = np.asarray(x, dtype=float)
        if self.family == "gaussian":
            out = np.all(np.isfinite(x), axis=-1)
        elif self.family == "exponential":
            out = np.all(x >= 0.0, axis=-1)
        else:
            s = self.support
            out = np.all((x >= s.lo) & (x <= s.hi), axis=-1)
        return bool(out) if np.ndim(out) == 0 else out

    def log_normalizer(self) -> float:
        """The constant ``c`` in ``log density = -theta1 . S1(x) - c``."""
        d = self.dimension
        if self.family == "uniform":
            return math.log(self.support.volume)
        t = self._theta()
        if self.family == "gaussian":
            return 0.5 * d * math.log(math.pi / t)
        return -d * math.log(t)

    @property
    def support_radius(self) -> float:
        """Largest norm of a point of a bounded support."""
        if not self.bounded:
            return math.inf
        s = self.support
        far = np.maximum(np.abs(s.lo), np.abs(s.hi))
        return float(np.linalg.norm(far))

    def tail_radius(self, theta1: float | None = None, mass: float = TAIL_MASS) -> float:
        """Half-side of a box around the origin (or the orthant corner) outside of
        which the move law has less than ``mass`` probability."""
        if self.bounded:
            return self.support_radius
        t = self._theta() if theta1 is None else float(theta1)
        return scaled_tail(self.family, self.dimension, mass) / t if self.family == "exponential" \
            else math.sqrt(scaled_tail(self.family, self.dimension, mass) / t)

    def mode(self) -> np.ndarray:
        """Starting displacement for chains: 0, the support centre, or the mean."""
        if self.family == "uniform":
            return 0.5 * (self.support.lo + self.support.hi)
        if self.family == "gaussian":
            return np.zeros(self.dimension)
        return np.full(self.dimension, 1.0 / self._theta())


def scaled_tail(family: str, d: int, mass: float = TAIL_MASS) -> float:
    """Quantile ``T`` with ``P(theta1 * S1(X) > T) = mass``.

    ``theta1 * S1(X)`` is Gamma(d/2) for gaussian moves and Gamma(d) for
    exponential moves, whatever theta1 is.  For the exponential family the
    returned value bounds each coordinate (box truncation).
    """
    if family == "gaussian":
        return float(stats.gamma.isf(mass, 0.5 * d))
    if family == "exponential":
        # per-coordinate cut so that 1 - (1 - exp(-T))^d = mass
        return float(-math.log(-math.expm1(math.log1p(-mass) / d)))
    raise ValueError(f"{family} moves are bounded")


def s1(m: MoveModel, x) -> np.ndarray:
    """Sufficient statistic of the move law; shape ``(..., p1)``."""
    x = np.asarray(x, dtype=float)
    if not np.all(m.in_support(x)):
        raise DomainError(f"move {x.tolist()} outside the {m.family} support")
    if m.family == "gaussian":
        return np.sum(x * x, axis=-1, keepdims=True)
    if m.family == "exponential":
        return np.sum(x, axis=-1, keepdims=True)
    return np.zeros(x.shape[:-1] + (0,))


def log_density(m: MoveModel, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    inside = m.in_support(x)
    xs = np.where(np.expand_dims(inside, -1), x, 0.0)
    stat = s1(m, xs)
    val = -(stat @ np.asarray(m.theta1, dtype=float).reshape(m.p1)) - m.log_normalizer()
    val = np.where(inside, val, -np.inf)
    return float(val) if np.ndim(val) == 0 else val


def sample_move(m: MoveModel, rng, size=None) -> np.ndarray:
    """Draw from the move law; ``size`` is the number of draws (None for one)."""
    shape = (m.dimension,) if size is None else (size, m.dimension)
    if m.family == "gaussian":
        return rng.normal(0.0, math.sqrt(0.5 / m._theta()), size=shape)
    if m.family == "exponential":
        return rng.exponential(1.0 / m._theta(), size=shape)
    return rng.uniform(m.support.lo, m.support.hi, size=shape)


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    truncation_radius: float
    cell: np.ndarray | None = None  # side lengths of the cells of a tensor midpoint rule

    def __len__(self):
        return len(self.weights)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def midpoint_rule(lower, upper, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product midpoint rule on a box."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    h = (upper - lower) / resolution
    axes = [lo + h_k * (np.arange(resolution) + 0.5) for lo, h_k in zip(lower, h)]
    grids = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.full(len(nodes), float(np.prod(h)))
    return nodes, weights


def quadrature(m: MoveModel, resolution: int | None = None, radius_hint: float = 0.0,
               theta_low: float | None = None) -> QuadratureRule:
    """Midpoint rule over the support (bounded case) or over a truncated box.

    For unbounded supports the box half-side is the larger of ``radius_hint``
    and the tail radius at ``theta_low`` (defaults to the model's theta1); use the
    smallest theta1 an optimiser may visit so the box is wide enough for all of them.
    """
    if resolution is None:
        resolution = DEFAULT_RESOLUTION[m.family]
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    d = m.dimension
    if m.bounded:
        nodes, weights = midpoint_rule(m.support.lo, m.support.hi, resolution)
        return QuadratureRule(nodes, weights, m.support_radius,
                              (m.support.hi - m.support.lo) / resolution)
    rho = max(radius_hint, m.tail_radius(theta_low))
    lo = np.full(d, -rho) if m.family == "gaussian" else np.zeros(d)
    nodes, weights = midpoint_rule(lo, np.full(d, rho), resolution)
    return QuadratureRule(nodes, weights, rho, (rho - lo) / resolution)
