"""Border-corrected estimating equations for Framework-1 data.

For every usable site ``i`` (site inside ``W - (m_n + R)`` and observed point
inside ``W - R``) the border-corrected conditional intensity is

    Lambda_n(i, x) = b_n(i, x) exp(-theta . S(i, x)) / int b_n(i, y) exp(-theta . S(i, y)) dy,

with the integral taken by a midpoint rule on the move support.  The DLR
statistic of a test function ``f`` is ``sum_i f(obs_i) - E_Lambda_n[f]``, the
Takacs-Fiksel criterion sums squared DLR statistics over a bank, and the
pseudo-likelihood is the score-function instance.

Because the parameter enters only through ``theta . S``, the per-site node
table is reduced once to groups of nodes sharing the same interaction counts.
Each evaluation then costs a sparse matrix-vector product.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize, sparse

from ._kernels import CellList
from .conditional import GibbsModel, ThetaVector
from .errors import (ConfigError, DegenerateSiteError, InfeasibleThetaError,
                     InsufficientDataError)
from .geometry import Window, erode
from .moves import QuadratureRule, quadrature, s1
from .patterns import Observation

log = logging.getLogger(__name__)

#: lower and upper multiples of the pilot theta1 used as default box bounds
THETA1_RANGE = (0.25, 25.0)
THETA2_BOUNDS = (-10.0, 50.0)


@dataclass(frozen=True)
class EstimatorConfig:
    beta: float = 1.0
    fixed_m: float | None = None
    quad_resolution: int | None = None
    optimizer: str = "simplex"
    theta_bounds: tuple | None = None
    theta_init: tuple | None = None
    test_functions: tuple = ("score",)
    ftol: float = 1e-8
    maxiter: int = 2000

    def __post_init__(self):
        if not self.beta > 0.5:
            raise ConfigError(f"beta must exceed 1/2, got {self.beta}")
        if self.fixed_m is not None and self.fixed_m < 0:
            raise ConfigError("fixed_m must be nonnegative")
        if self.optimizer not in ("simplex", "gradient"):
            raise ConfigError(f"optimizer must be 'simplex' or 'gradient', got {self.optimizer!r}")
        if self.quad_resolution is not None and self.quad_resolution < 2:
            raise ConfigError("quad_resolution must be at least 2")
        if self.theta_bounds is not None:
            object.__setattr__(self, "theta_bounds",
                               tuple((float(a), float(b)) for a, b in self.theta_bounds))
        if self.theta_init is not None:
            object.__setattr__(self, "theta_init", tuple(float(t) for t in self.theta_init))
        object.__setattr__(self, "test_functions", tuple(self.test_functions))

    def m_n(self, gm: GibbsModel, window: Window) -> float:
        """Border depth: ``fixed_m``, the support radius for bounded moves,
        otherwise ``beta * log |W|``."""
        if self.fixed_m is not None:
            return float(self.fixed_m)
        if gm.move.bounded:
            return gm.move.support_radius
        return self.beta * math.log(max(window.volume, 1.0))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["test_functions"] = [t if isinstance(t, str) else getattr(t, "name", "custom")
                                 for t in self.test_functions]
        return out


# ---------------------------------------------------------------------------
# test functions

@dataclass(frozen=True)
class TestFunction:
    """``f = const + coef . S`` or, if ``func`` is set, ``func(i, x, s, theta)``
    evaluated on stacked arrays of sites, moves and joint statistics."""

    __test__ = False  # not a pytest class

    name: str
    const: float = 0.0
    coef: tuple | None = None
    func: Callable | None = None

    @property
    def linear(self) -> bool:
        return self.func is None


def _unit(p: int, k: int) -> tuple:
    v = [0.0] * p
    v[k] = 1.0
    return tuple(v)


def resolve_bank(gm: GibbsModel, bank) -> list[TestFunction]:
    """Expand names (``one``, ``score``, ``s1``, ``s2:k``), callables and
    TestFunction objects into a flat list."""
    out: list[TestFunction] = []
    p = gm.p
    for item in bank:
        if isinstance(item, TestFunction):
            out.append(item)
        elif callable(item):
            out.append(TestFunction(getattr(item, "__name__", "custom"), func=item))
        elif item == "one":
            out.append(TestFunction("one", const=1.0, coef=(0.0,) * p))
        elif item == "score":
            out.extend(TestFunction(n, coef=_unit(p, k)) for k, n in enumerate(stat_names(gm)))
        elif item == "s1":
            if gm.p1 == 0:
                raise ConfigError("the move law has no S1 statistic")
            out.append(TestFunction("s1", coef=_unit(p, 0)))
        elif isinstance(item, str) and item.startswith("s2:"):
            k = int(item[3:])
            if not 0 <= k < gm.p2:
                raise ConfigError(f"test function {item!r}: band index out of range")
            out.append(TestFunction(item, coef=_unit(p, gm.p1 + k)))
        else:
            raise ConfigError(f"unknown test function {item!r}")
    return out


def stat_names(gm: GibbsModel) -> list[str]:
    return ["s1"] * gm.p1 + [f"s2:{k}" for k in range(gm.p2)]


# ---------------------------------------------------------------------------
# cached evaluator

def pilot_theta1(gm: GibbsModel, moves: np.ndarray) -> float | None:
    """Interaction-free moment estimate of theta1 from observed moves."""
    if gm.p1 == 0 or len(moves) == 0:
        return None
    d = gm.dimension
    if gm.move.family == "gaussian":
        ss = float(np.sum(moves * moves))
        return d * len(moves) / (2.0 * ss) if ss > 0 else 1.0
    ss = float(np.sum(moves))
    return d * len(moves) / ss if ss > 0 else 1.0


class DLREvaluator:
    """Per-observation cache of the statistics needed by every estimating equation.

    Built once for a model structure (move family, bands, hard-core radius) and
    reused for any theta.  ``theta_low`` sets the truncation box of unbounded
    move laws; it should not exceed the smallest theta1 that will be evaluated.
    """

    def __init__(self, obs: Observation, gm: GibbsModel, cfg: EstimatorConfig | None = None,
                 theta_low: float | None = None, quad: QuadratureRule | None = None):
        if obs.framework != "F1":
            raise ConfigError("estimating equations need Framework-1 (site, move) data")
        cfg = cfg or EstimatorConfig()
        self.gm, self.cfg, self.obs = gm, cfg, obs
        w = obs.window
        self.m_n = cfg.m_n(gm, w)
        R = gm.range
        inner, outer = erode(w, self.m_n + R), erode(w, R)
        usable = inner.contains(obs.sites) & outer.contains(obs.sites + obs.displacements)
        usable = np.atleast_1d(usable).astype(bool)
        self.n_sites = int(usable.sum())
        self.volume = w.volume
        if self.n_sites == 0:
            raise InsufficientDataError(
                f"no usable site: window {w.to_dict()} eroded by m_n + R = "
                f"{self.m_n + R:.3f} keeps none of the {len(obs.sites)} observed pairs", 0)
        self.sites = obs.sites[usable]
        self.moves = obs.displacements[usable]
        own = obs.point_index[usable]
        self.pilot = pilot_theta1(gm, self.moves)

        if quad is None:
            if gm.p1 and theta_low is None:
                theta_low = THETA1_RANGE[0] * self.pilot
            quad = quadrature(gm.move, cfg.quad_resolution, theta_low=theta_low)
        self.quad = quad

        inter = gm.interaction
        cells = CellList(obs.points, max(R, 1e-9), (w.lo, w.hi))
        edges = inter.band_edges
        counts, hc = cells.band_counts(self.sites + self.moves, own, inter.hardcore_r, edges)
        self.infeasible = bool(np.any(hc))
        s1_obs = s1(gm.move, self.moves).reshape(self.n_sites, gm.p1)
        self.stat_obs = np.hstack([s1_obs, counts.astype(float)])

        # node table: (site, node) pairs with the node admissible under b_n and hard-core
        nodes, weights = quad.nodes, quad.weights
        q = len(weights)
        self.node_s1 = s1(gm.move, nodes).reshape(q, gm.p1)
        rows_site, rows_node, rows_k = [], [], []
        chunk = max(1, 4_000_000 // max(q, 1))
        for a in range(0, self.n_sites, chunk):
            sl = slice(a, a + chunk)
            y = (self.sites[sl, None, :] + nodes[None, :, :]).reshape(-1, gm.dimension)
            skip = np.repeat(own[sl], q)
            c, h = cells.band_counts(y, skip, inter.hardcore_r, edges)
            ok = outer.contains(y) & ~h
            idx = np.flatnonzero(ok)
            rows_site.append(a + idx // q)
            rows_node.append(idx % q)
            rows_k.append(c[idx])
            del y, skip, c, h
        site_of = np.concatenate(rows_site)
        node_of = np.concatenate(rows_node)
        k_of = np.concatenate(rows_k).reshape(-1, gm.p2)
        if len(site_of) == 0 or np.unique(site_of).size < self.n_sites:
            raise DegenerateSiteError("a usable site has no admissible move on the quadrature grid")
        key = np.column_stack([site_of, k_of])
        groups, inverse = np.unique(key, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        self.group_site = groups[:, 0].astype(np.int64)
        self.group_k = groups[:, 1:].astype(float)
        self.group_start = np.flatnonzero(np.r_[True, np.diff(self.group_site) != 0])
        self.A = sparse.csr_matrix((np.ones(len(inverse)), (inverse, node_of)),
                                   shape=(len(groups), q))
        # kept for test functions that are not linear in S
        self._pair_group = inverse
        self._pair_node = node_of
        self.n_pairs = len(inverse)

    # -- core -----------------------------------------------------------------

    def _theta(self, theta) -> ThetaVector:
        return self.gm.theta(theta)

    def _groups(self, theta):
        """Log-weight of each node group, per-site log Z and group probabilities."""
        tv = self._theta(theta)
        t1 = np.asarray(tv.theta1, dtype=float)
        t2 = np.asarray(tv.theta2, dtype=float)
        w = self.quad.weights
        e = w * np.exp(-(self.node_s1 @ t1)) if len(t1) else w
        with np.errstate(divide="ignore"):
            G = self.A @ e
            logg = np.log(G) - self.group_k @ t2
        mx = np.maximum.reduceat(logg, self.group_start)
        with np.errstate(invalid="ignore"):
            shifted = np.exp(logg - mx[self.group_site])
        tot = np.add.reduceat(shifted, self.group_start)
        logz = mx + np.log(tot)
        prob = shifted / tot[self.group_site]
        H = None
        if len(t1):
            H = (self.A @ (e[:, None] * self.node_s1)) / np.where(G > 0, G, 1.0)[:, None]
        return tv, logz, prob, H

    def expected_stats(self, theta) -> np.ndarray:
        """``E_Lambda_n[S]`` per usable site, shape ``(n_sites, p)``."""
        _, _, prob, H = self._groups(theta)
        parts = []
        if H is not None:
            parts.append(H * prob[:, None])
        parts.append(self.group_k * prob[:, None])
        per_group = np.hstack(parts)
        return np.add.reduceat(per_group, self.group_start, axis=0)

    def ab(self, theta, f: TestFunction) -> tuple[float, float]:
        """``A = sum_i f(obs_i)`` and ``B = sum_i E_Lambda_n[f]`` over usable sites."""
        tv = self._theta(theta)
        if f.linear:
            coef = np.asarray(f.coef if f.coef is not None else (0.0,) * self.gm.p, dtype=float)
            a = self.n_sites * f.const + float(np.sum(self.stat_obs @ coef))
            b = self.n_sites * f.const + float(np.sum(self.expected_stats(tv) @ coef))
            return a, b
        a = float(np.sum(f.func(self.sites, self.moves, self.stat_obs, tv)))
        return a, float(np.sum(self._custom_expectation(tv, f)))

    def _custom_expectation(self, tv: ThetaVector, f: TestFunction) -> np.ndarray:
        t1 = np.asarray(tv.theta1, dtype=float)
        t2 = np.asarray(tv.theta2, dtype=float)
        _, logz, _, _ = self._groups(tv)
        g, q = self._pair_group, self._pair_node
        site = self.group_site[g]
        stat = np.hstack([self.node_s1[q], self.group_k[g]])
        logw = np.log(self.quad.weights[q]) - stat @ np.r_[t1, t2] - logz[site]
        vals = f.func(self.sites[site], self.quad.nodes[q], stat, tv)
        return np.bincount(site, weights=np.exp(logw) * vals, minlength=self.n_sites)

    def dlr(self, theta, f: TestFunction) -> float:
        a, b = self.ab(theta, f)
        return a - b

    def dlr_bank(self, theta, bank) -> np.ndarray:
        tv = self._theta(theta)
        fs = resolve_bank(self.gm, bank)
        if all(f.linear for f in fs):
            diff = np.sum(self.stat_obs - self.expected_stats(tv), axis=0)
            return np.array([float(np.dot(diff, f.coef)) if f.coef is not None else 0.0
                             for f in fs])
        return np.array([self.dlr(tv, f) for f in fs])

    def tf(self, theta, bank=("score",)) -> float:
        if self.infeasible:
            return math.inf
        v = self.dlr_bank(theta, bank)
        val = float(np.dot(v, v))
        return val if math.isfinite(val) else math.inf

    def lpl_and_gradient(self, theta) -> tuple[float, np.ndarray]:
        tv = self._theta(theta)
        if self.infeasible:
            return -math.inf, np.full(self.gm.p, np.nan)
        _, logz, prob, H = self._groups(tv)
        lpl = float(-np.sum(self.stat_obs @ tv.vector) - np.sum(logz))
        grad = -np.sum(self.stat_obs - self.expected_stats(tv), axis=0)
        return lpl, grad


# ---------------------------------------------------------------------------
# public functional interface

def dlr_statistic(obs: Observation, gm: GibbsModel, theta, f="one",
                  cfg: EstimatorConfig | None = None) -> float:
    ev = DLREvaluator(obs, gm, cfg, theta_low=theta_low_for(gm, theta))
    fs = resolve_bank(gm, [f])
    if len(fs) != 1:
        raise ConfigError("dlr_statistic takes a single test function")
    return ev.dlr(theta, fs[0])


def tf_criterion(obs: Observation, gm: GibbsModel, theta, bank=("score",),
                 cfg: EstimatorConfig | None = None) -> float:
    ev = DLREvaluator(obs, gm, cfg, theta_low=theta_low_for(gm, theta))
    return ev.tf(theta, bank)


def lpl_and_gradient(obs: Observation, gm: GibbsModel, theta,
                     cfg: EstimatorConfig | None = None) -> tuple[float, np.ndarray]:
    ev = DLREvaluator(obs, gm, cfg, theta_low=theta_low_for(gm, theta))
    return ev.lpl_and_gradient(theta)


def theta_low_for(gm: GibbsModel, theta) -> float | None:
    tv = gm.theta(theta)
    return THETA1_RANGE[0] * tv.theta1[0] if tv.theta1 else None


@dataclass
class FitResult:
    theta_hat: ThetaVector
    criterion_value: float
    n_sites_used: int
    converged: bool
    residuals: dict
    config: dict = field(default_factory=dict)
    method: str = "takacs-fiksel"
    message: str = ""

    def to_dict(self) -> dict:
        return {"theta_hat": self.theta_hat.to_list(), "criterion": self.criterion_value,
                "converged": bool(self.converged), "n_sites_used": int(self.n_sites_used),
                "residuals": self.residuals, "method": self.method, "message": self.message,
                "config": self.config}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def default_bounds(gm: GibbsModel, pilot: float | None) -> list[tuple[float, float]]:
    b = []
    if gm.p1:
        b.append((THETA1_RANGE[0] * pilot, THETA1_RANGE[1] * pilot))
    b.extend([THETA2_BOUNDS] * gm.p2)
    return b


def _initial(gm: GibbsModel, cfg: EstimatorConfig, pilot, bounds) -> np.ndarray:
    if cfg.theta_init is not None:
        x0 = np.asarray(cfg.theta_init, dtype=float)
        if len(x0) != gm.p:
            raise ConfigError(f"theta_init has {len(x0)} entries, model needs {gm.p}")
    else:
        x0 = np.array(([pilot] if gm.p1 else []) + [0.0] * gm.p2, dtype=float)
    lo, hi = np.array(bounds).T
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ConfigError("theta_init lies outside theta_bounds")
    return x0


def fit_takacs_fiksel(obs: Observation, family: GibbsModel,
                      cfg: EstimatorConfig | None = None) -> FitResult:
    """Minimise the Takacs-Fiksel criterion within box bounds.

    With the default score bank this is the border-corrected pseudo-likelihood
    estimator.  ``optimizer='gradient'`` instead maximises the log
    pseudo-likelihood with its analytic gradient (score bank only).
    """
    cfg = cfg or EstimatorConfig()
    gm = family
    if obs.framework != "F1":
        raise ConfigError("Takacs-Fiksel fitting needs Framework-1 data")
    # box of the quadrature rule: the smallest theta1 the optimiser may visit
    theta_low = None
    if gm.p1:
        pilot = pilot_theta1(gm, obs.displacements)
        theta_low = THETA1_RANGE[0] * pilot
        if cfg.theta_bounds is not None:
            theta_low = max(cfg.theta_bounds[0][0], theta_low)
    ev = DLREvaluator(obs, gm, cfg, theta_low=theta_low)
    if ev.n_sites < gm.p:
        raise InsufficientDataError(
            f"only {ev.n_sites} usable sites for {gm.p} parameters", ev.n_sites)
    if ev.infeasible:
        raise InfeasibleThetaError("observed points violate the hard-core radius; "
                                   "the pseudo-likelihood is -inf for every theta")
    bounds = (list(cfg.theta_bounds) if cfg.theta_bounds is not None
              else default_bounds(gm, ev.pilot))
    if len(bounds) != gm.p:
        raise ConfigError(f"theta_bounds has {len(bounds)} entries, model needs {gm.p}")
    x0 = _initial(gm, cfg, ev.pilot, bounds)
    bank = cfg.test_functions
    fs = resolve_bank(gm, bank)
    if len(fs) < gm.p:
        raise ConfigError(f"the bank has {len(fs)} test functions, at least {gm.p} are needed")

    if cfg.optimizer == "gradient":
        if tuple(bank) != ("score",):
            raise ConfigError("the gradient optimiser applies to the score bank only")

        def negl(x):
            v, g = ev.lpl_and_gradient(x)
            if not math.isfinite(v):
                return 1e300, np.zeros_like(x)
            return -v, -g

        res = optimize.minimize(negl, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                                options={"maxiter": cfg.maxiter, "ftol": cfg.ftol * 1e-4,
                                         "gtol": 1e-9})
    else:
        res = optimize.minimize(lambda x: ev.tf(x, fs), x0, method="Nelder-Mead",
                                bounds=bounds,
                                options={"maxiter": cfg.maxiter, "maxfev": 4 * cfg.maxiter,
                                         "fatol": cfg.ftol, "xatol": 1e-7,
                                         "initial_simplex": _simplex(x0, bounds)})
    x = np.clip(res.x, *np.array(bounds).T)
    tv = gm.theta(x)
    crit = ev.tf(tv, fs)
    resid = ev.dlr_bank(tv, fs) / ev.volume
    at_bound = any(np.isclose(v, b, rtol=1e-6, atol=1e-9)
                   for v, bb in zip(x, bounds) for b in bb)
    converged = bool(res.success) and math.isfinite(crit)
    msg = str(res.message)
    if at_bound:
        msg += " (estimate on a box bound)"
    log.debug("fit n_sites=%d theta=%s crit=%.3g nfev=%s", ev.n_sites, tv.to_list(), crit,
              getattr(res, "nfev", None))
    return FitResult(tv, crit, ev.n_sites, converged,
                     {f.name: float(r) for f, r in zip(fs, resid)},
                     {**cfg.to_dict(), "m_n": ev.m_n, "theta_bounds": [list(b) for b in bounds],
                      "quad_nodes": len(ev.quad), "truncation_radius": ev.quad.truncation_radius,
                      "quad_theta_low": theta_low},
                     "takacs-fiksel" if cfg.optimizer == "simplex" else "pseudo-likelihood", msg)


def _simplex(x0: np.ndarray, bounds) -> np.ndarray:
    """Initial simplex with steps of 10% of the start value (0.25 for zeros),
    flipped inwards when a step would leave the box."""
    p = len(x0)
    sim = np.tile(x0, (p + 1, 1))
    for k in range(p):
        step = 0.1 * abs(x0[k]) if x0[k] != 0 else 0.25
        lo, hi = bounds[k]
        sim[k + 1, k] = x0[k] + step if x0[k] + step <= hi else x0[k] - step
        sim[k + 1, k] = min(max(sim[k + 1, k], lo), hi)
    return sim
