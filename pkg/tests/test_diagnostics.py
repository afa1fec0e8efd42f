import csv
import json

import numpy as np
import pytest

from gibbslat.conditional import GibbsModel
from gibbslat.diagnostics import (ball_counts, ball_volume, ergodic_averages, residual_report,
                                  variance_curve, write_curve, write_report)
from gibbslat.errors import DomainError, InsufficientDataError
from gibbslat.geometry import Window
from gibbslat.inference import DLREvaluator, EstimatorConfig, dlr_statistic
from gibbslat.interactions import InteractionModel
from gibbslat.moves import MoveModel
from gibbslat.patterns import PointPattern
from gibbslat.sampler import SimulationPlan, simulate

CFG = EstimatorConfig(beta=0.51)
GM = GibbsModel(MoveModel.gaussian(2), InteractionModel.strauss(0.5))


def poisson(rng, half):
    w = Window.cube(half)
    n = rng.poisson(w.volume)
    return PointPattern(rng.uniform(-half, half, (n, 2)), w)


def lattice_patterns(K, half, move_half, seed):
    """Shifted Z^2 with i.i.d. uniform moves on [-move_half, move_half]^2."""
    rng = np.random.default_rng(seed)
    w = Window.cube(half)
    g = np.arange(-half - 2, half + 3, dtype=float)
    sites = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    out = []
    for _ in range(K):
        pts = sites + rng.uniform(0, 1, 2) + rng.uniform(-move_half, move_half, sites.shape)
        out.append(PointPattern(pts[w.contains(pts)], w))
    return out


def mcmc(theta, half, seed, burn=100):
    return simulate(SimulationPlan(GM, theta, Window.cube(half), None, 1, burn, seed))[1]


class TestVarianceCurve:
    def test_ball_counts(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0]])
        got = ball_counts([pts], [0.5, 1.0, 2.0, 5.0])
        assert got.tolist() == [[1, 2, 3, 4]]

    def test_identical_patterns_zero(self):
        pat = poisson(np.random.default_rng(0), 6)
        c = variance_curve([pat] * 12, [1, 2, 3])
        np.testing.assert_array_equal(c.ratios, 0.0)

    def test_too_few_replicates(self):
        rng = np.random.default_rng(0)
        with pytest.raises(InsufficientDataError):
            variance_curve([poisson(rng, 6) for _ in range(9)], [1, 2])

    def test_ball_outside_window(self):
        rng = np.random.default_rng(0)
        with pytest.raises(DomainError):
            variance_curve([poisson(rng, 6) for _ in range(10)], [1, 7])
        with pytest.raises(DomainError):
            variance_curve([poisson(rng, 6) for _ in range(10)], [1, 2], center=(5.0, 0.0))

    def test_poisson_ratio_one(self):
        rng = np.random.default_rng(1)
        radii = np.array([1.0, 2.0, 4.0, 8.0])
        c = variance_curve([poisson(rng, 10) for _ in range(300)], radii)
        assert np.all(np.abs(c.ratios - 1.0) < 4 * c.standard_errors)
        assert not c.exploratory

    def test_perturbed_lattice_below_poisson(self):
        c = variance_curve(lattice_patterns(60, 11, 0.5, seed=2), [10.0])
        assert c.ratios[0] + 4 * c.standard_errors[0] < 1.0

    def test_unperturbed_lattice_decays(self):
        c = variance_curve(lattice_patterns(200, 13, 0.0, seed=3), [3.0, 12.0])
        assert c.ratios[1] < c.ratios[0]

    def test_ball_volume(self):
        assert ball_volume(2.0, 2) == pytest.approx(4 * np.pi)
        assert ball_volume(1.0, 3) == pytest.approx(4 * np.pi / 3)

    def test_write(self, tmp_path):
        rng = np.random.default_rng(0)
        c = variance_curve([poisson(rng, 6) for _ in range(10)], [1, 2])
        write_curve(c, tmp_path / "c.csv", tmp_path / "c.json")
        rows = list(csv.reader(open(tmp_path / "c.csv")))
        assert rows[0] == ["r", "ratio", "se"]
        assert [float(v) for v in rows[2]] == [2.0, c.ratios[1], c.standard_errors[1]]
        assert json.load(open(tmp_path / "c.json"))["n_replicates"] == 10


class TestErgodic:
    def test_difference_is_scaled_dlr(self):
        obs = mcmc((1.0, 0.69), 8, seed=0)
        th = (1.2, 0.5)
        ev = DLREvaluator(obs, GM, CFG, theta_low=0.3)
        for f in ("s1", "s2:0", "score"):
            rep = residual_report(obs, GM, th, (f,), CFG, evaluator=ev)
            dlr = ev.dlr_bank(th, (f,)) / ev.volume
            np.testing.assert_allclose(rep.a_avg - rep.b_avg, dlr, atol=1e-10)
            np.testing.assert_allclose(rep.residuals, dlr, atol=1e-10)
        a, b = ergodic_averages(obs, GM, th, "s2:0", CFG)
        assert a - b == pytest.approx(
            dlr_statistic(obs, GM, th, "s2:0", CFG) / obs.window.volume, abs=1e-10)

    def test_constant_function(self):
        obs = mcmc((1.0, 0.69), 8, seed=1)
        ev = DLREvaluator(obs, GM, CFG, theta_low=0.3)
        a, b = ergodic_averages(obs, GM, (1.0, 0.69), "one", evaluator=ev)
        assert a == pytest.approx(ev.n_sites / ev.volume, rel=1e-12)
        assert b == pytest.approx(ev.n_sites / ev.volume, rel=1e-12)

    @pytest.mark.slow
    def test_spread_shrinks_with_window(self):
        th = (1.0, 0.69)
        spread = {}
        for half in (8.0, 16.0):
            vals = [ergodic_averages(mcmc(th, half, seed=10 + k), GM, th, "s2:0", CFG)
                    for k in range(20)]
            spread[half] = np.std([a - b for a, b in vals], ddof=1)
        assert spread[16.0] < spread[8.0]

    def test_misspecified_interaction(self):
        truth = (1.0, 1.5)
        worse = 0
        for k in range(20):
            obs = mcmc(truth, 8, seed=40 + k)
            ev = DLREvaluator(obs, GM, CFG, theta_low=0.3)
            good = residual_report(obs, GM, truth, ("s2:0",), evaluator=ev).residuals[0]
            bad = residual_report(obs, GM, (1.0, 0.0), ("s2:0",), evaluator=ev).residuals[0]
            worse += abs(bad) > abs(good)
        assert worse >= 18

    def test_write_report(self, tmp_path):
        obs = mcmc((1.0, 0.69), 8, seed=2)
        rep = residual_report(obs, GM, (1.0, 0.69), cfg=CFG)
        write_report(rep, tmp_path / "r.csv", tmp_path / "r.json")
        rows = list(csv.reader(open(tmp_path / "r.csv")))
        assert [r[0] for r in rows[1:]] == list(rep.names)
        d = json.load(open(tmp_path / "r.json"))
        assert d["n_sites_used"] == rep.n_sites_used
