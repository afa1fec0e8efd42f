"""Finite-volume Metropolis-Hastings simulation of Gibbs perturbed lattices.

Each site update proposes a fresh move drawn from the move law itself
(independence proposal), so the acceptance probability reduces to
``min(1, exp(h_old - h_new))`` where ``h`` is the local interaction energy.
Sweeps visit sites in lexicographic order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from ._kernels import CellList
from .conditional import GibbsModel, ThetaVector
from .errors import ConfigError
from .geometry import Window, sample_shift, shifted_sites
from .interactions import total_energy
from .moves import sample_move
from .patterns import Observation, observe
from .rng import child_seed, make_rng

log = logging.getLogger(__name__)

DEFAULT_BURN_IN = 10_000
DEFAULT_SWEEPS = 1_000


def required_margin(model: GibbsModel, theta) -> float:
    """Minimal distance between observation and simulation window sides."""
    tv = model.theta(theta)
    t1 = tv.theta1[0] if tv.theta1 else None
    return model.range + model.move.with_theta(tv.theta1).tail_radius(t1)


def default_sim_window(model: GibbsModel, theta, obs_window: Window) -> Window:
    margin = required_margin(model, theta) + 5.0 * model.lattice.size
    return obs_window.dilate(margin)


@dataclass(frozen=True)
class SimulationPlan:
    model: GibbsModel
    theta: ThetaVector
    obs_window: Window
    sim_window: Window | None = None
    sweeps: int = DEFAULT_SWEEPS
    burn_in: int = DEFAULT_BURN_IN
    seed: int = 0
    shift: tuple | None = None  # None draws a uniform shift

    def __post_init__(self):
        object.__setattr__(self, "theta", self.model.theta(self.theta))
        if self.sim_window is None:
            object.__setattr__(self, "sim_window",
                               default_sim_window(self.model, self.theta, self.obs_window))
        if self.shift is not None:
            object.__setattr__(self, "shift", tuple(float(v) for v in np.atleast_1d(self.shift)))

    def validate(self) -> None:
        if self.sweeps < 1 or self.burn_in < 0:
            raise ConfigError("sweeps must be >= 1 and burn_in >= 0")
        if self.obs_window.is_empty:
            raise ConfigError("observation window is empty")
        if not self.sim_window.contains_window(self.obs_window):
            raise ConfigError("observation window must lie inside the simulation window")
        need = required_margin(self.model, self.theta)
        have = self.obs_window.margin_inside(self.sim_window)
        if have < need - 1e-12:
            raise ConfigError(f"simulation margin {have:.3f} is below the required "
                              f"{need:.3f} (range + move truncation radius)")
        if self.shift is not None and not self.model.lattice.in_fundamental_domain(self.shift):
            raise ConfigError("fixed shift must lie in the fundamental domain")
        m = self.model.move
        if m.p1 and not self.theta.theta1[0] > 0:
            raise ConfigError("theta1 must be positive")

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "theta": self.theta.to_list(),
                "sim_window": self.sim_window.to_dict(), "obs_window": self.obs_window.to_dict(),
                "sweeps": self.sweeps, "burn_in": self.burn_in, "seed": int(self.seed),
                "shift": None if self.shift is None else list(self.shift)}


class LatticeConfiguration:
    """Shift, shifted sites and per-site displacements of a finite lattice.

    Positions are held in a cell list that the MH kernel updates in place.
    """

    def __init__(self, model: GibbsModel, theta, sites, shift, displacements,
                 indices=None, bounds: Window | None = None):
        self.model = model.with_theta(theta)
        self.theta = model.theta(theta)
        self.sites = np.ascontiguousarray(sites, dtype=float)
        self.shift = np.asarray(shift, dtype=float)
        self.displacements = np.ascontiguousarray(displacements, dtype=float).copy()
        self.indices = indices
        if bounds is None:
            pad = model.range
            lo = self.sites.min(axis=0) - pad if len(self.sites) else np.zeros(model.dimension)
            hi = self.sites.max(axis=0) + pad if len(self.sites) else np.ones(model.dimension)
        else:
            lo, hi = bounds.lo, bounds.hi
        self._cells = CellList(self.sites + self.displacements, model.range, (lo, hi))
        self.last_acceptance = math.nan

    @property
    def positions(self) -> np.ndarray:
        """Live view of ``sites + displacements``."""
        return self._cells.pts

    def __len__(self):
        return len(self.sites)

    def total_energy(self) -> float:
        return total_energy(self.model.interaction, self.positions)

    def observe(self, window: Window) -> tuple[Observation, Observation]:
        return observe(self.sites, self.displacements, self.shift, window)

    def _run(self, order, proposals, uniforms) -> int:
        inter = self.model.interaction
        return self._cells.mh_sweep(order, self.sites, self.displacements, proposals, uniforms,
                                    inter.theta2, inter.hardcore_r, inter.band_edges)


def mh_site_update(cfg: LatticeConfiguration, i: int, rng) -> bool:
    """One MH update of site ``i``; returns whether the proposal was accepted."""
    prop = np.ascontiguousarray(sample_move(cfg.model.move, rng, size=1))
    u = np.asarray([rng.random()])
    return bool(cfg._run(np.array([i]), prop, u))


def mh_sweep(cfg: LatticeConfiguration, rng) -> float:
    """Update every site once in lexicographic order; returns the acceptance rate."""
    n = len(cfg)
    if n == 0:
        return math.nan
    prop = np.ascontiguousarray(sample_move(cfg.model.move, rng, size=n))
    u = rng.random(n)
    rate = cfg._run(np.arange(n), prop, u) / n
    cfg.last_acceptance = rate
    return rate


def initial_configuration(plan: SimulationPlan, rng) -> LatticeConfiguration:
    model = plan.model.with_theta(plan.theta)
    lat = model.lattice
    shift = np.asarray(plan.shift) if plan.shift is not None else sample_shift(lat, rng)
    sites, idx = shifted_sites(lat, shift, plan.sim_window, return_indices=True)
    disp = np.tile(model.move.mode(), (len(sites), 1))
    bounds = plan.sim_window.dilate(model.range + model.move.tail_radius())
    cfg = LatticeConfiguration(model, plan.theta, sites, shift, disp, idx, bounds)
    if not math.isfinite(cfg.total_energy()):
        raise ConfigError("initial configuration violates the hard-core constraint")
    return cfg


def run_chain(plan: SimulationPlan) -> LatticeConfiguration:
    plan.validate()
    rng = make_rng(plan.seed)
    cfg = initial_configuration(plan, rng)
    for _ in range(plan.burn_in + plan.sweeps):
        mh_sweep(cfg, rng)
    log.debug("chain seed=%d sites=%d final acceptance=%.3f", plan.seed, len(cfg),
              cfg.last_acceptance)
    return cfg


def simulate(plan: SimulationPlan):
    """Run the chain and clip it: returns ``(configuration, F1, F2)``."""
    cfg = run_chain(plan)
    f1, f2 = cfg.observe(plan.obs_window)
    return cfg, f1, f2


def replicate_plan(plan: SimulationPlan, k: int) -> SimulationPlan:
    return replace(plan, seed=child_seed(plan.seed, k))


def _one(plan, k):
    _, f1, f2 = simulate(replicate_plan(plan, k))
    return f1, f2


def replicate(plan: SimulationPlan, K: int, jobs: int = 1) -> list[tuple[Observation, Observation]]:
    """``K`` independent ``(F1, F2)`` observations, replicate ``k`` seeded by
    ``child_seed(plan.seed, k)``."""
    if K < 1:
        raise ValueError("K must be positive")
    plan.validate()
    if jobs == 1:
        return [_one(plan, k) for k in range(K)]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=jobs)(delayed(_one)(plan, k) for k in range(K))
