import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from gibbslat.errors import DomainError
from gibbslat.moves import (DEFAULT_RESOLUTION, MoveModel, log_density, quadrature, s1,
                            sample_move)


def families(theta):
    return [MoveModel.uniform((-0.5, -0.5), (0.5, 0.5)), MoveModel.gaussian(2, theta),
            MoveModel.exponential(2, theta)]


class TestS1:
    def test_gaussian(self):
        np.testing.assert_array_equal(s1(MoveModel.gaussian(2, 1.0), (3, 4)), [25])

    def test_exponential(self):
        np.testing.assert_array_equal(s1(MoveModel.exponential(2, 1.0), (1, 2)), [3])

    def test_uniform_empty(self):
        assert s1(MoveModel.uniform((-0.5, -0.5), (0.5, 0.5)), (0.1, 0.2)).shape == (0,)

    def test_outside_support(self):
        with pytest.raises(DomainError):
            s1(MoveModel.exponential(2, 1.0), (-1, 2))
        with pytest.raises(DomainError):
            s1(MoveModel.uniform((-0.5,), (0.5,)), (0.7,))


class TestLogDensity:
    def test_uniform_unit_box(self):
        assert log_density(MoveModel.uniform((-0.5, -0.5), (0.5, 0.5)), (0, 0)) == 0.0

    def test_gaussian_origin(self):
        assert log_density(MoveModel.gaussian(2, 1.0), (0, 0)) == pytest.approx(-math.log(math.pi))

    def test_exponential_1d(self):
        assert log_density(MoveModel.exponential(1, 2.0), (3,)) == pytest.approx(-6 + math.log(2))

    def test_outside(self):
        assert log_density(MoveModel.exponential(1, 2.0), (-0.1,)) == -math.inf

    @given(st.floats(0.05, 20), st.lists(st.floats(0, 3), min_size=2, max_size=2))
    def test_affine_in_s1(self, theta, x):
        for m in families(theta)[1:]:
            expect = -theta * s1(m, x)[0] - m.log_normalizer()
            assert log_density(m, x) == expect


class TestQuadrature:
    def test_uniform_nodes(self):
        q = quadrature(MoveModel.uniform((-0.5,), (0.5,)), 4)
        np.testing.assert_allclose(q.nodes.ravel(), [-0.375, -0.125, 0.125, 0.375])
        np.testing.assert_allclose(q.weights, 0.25)

    def test_gaussian_erf_oracle(self):
        m = MoveModel.gaussian(1, 1.0)
        q = quadrature(m, 200)
        rho = q.truncation_radius
        oracle = special.erf(rho)  # mass of N(0, 1/2) in [-rho, rho]
        total = q.integrate(np.exp(log_density(m, q.nodes)))
        assert abs(total - oracle) < 1e-6
        assert abs(total - 1) < 1e-6

    def test_exponential_cdf_oracle(self):
        m = MoveModel.exponential(1, 1.0)
        q = quadrature(m, 400)
        oracle = -math.expm1(-q.truncation_radius)
        total = q.integrate(np.exp(log_density(m, q.nodes)))
        assert abs(total - oracle) < 1e-4

    def test_default_resolution_tolerance(self):
        for m in families(1.7):
            q = quadrature(m)
            assert abs(q.integrate(np.exp(log_density(m, q.nodes))) - 1) < 1e-4

    def test_refined_normalisation_random_theta(self):
        rng = np.random.default_rng(5)
        for fam in ("uniform", "gaussian", "exponential"):
            for theta in np.exp(rng.uniform(np.log(0.1), np.log(20), 100)):
                m = families(theta)[("uniform", "gaussian", "exponential").index(fam)]
                q = quadrature(m, 4 * DEFAULT_RESOLUTION[fam])
                assert abs(q.integrate(np.exp(log_density(m, q.nodes))) - 1) < 1e-5

    def test_doubling_converges(self):
        for m in families(2.5):
            q1 = quadrature(m)
            q2 = quadrature(m, 2 * DEFAULT_RESOLUTION[m.family])
            i1 = q1.integrate(np.exp(log_density(m, q1.nodes)))
            i2 = q2.integrate(np.exp(log_density(m, q2.nodes)))
            assert abs(i1 - i2) < 10 * 1e-4

    def test_theta_low_widens_box(self):
        m = MoveModel.gaussian(2, 4.0)
        assert quadrature(m, 10, theta_low=1.0).truncation_radius == pytest.approx(
            2 * quadrature(m, 10).truncation_radius)

    def test_resolution_guard(self):
        with pytest.raises(ValueError):
            quadrature(MoveModel.gaussian(1, 1.0), 1)


class TestSampleMove:
    def test_uniform_support(self):
        x = sample_move(MoveModel.uniform((-0.5, -0.5), (0.5, 0.5)),
                        np.random.default_rng(0), 10_000)
        assert np.all(np.abs(x) <= 0.5)

    def test_exponential_support(self):
        x = sample_move(MoveModel.exponential(2, 1.0), np.random.default_rng(0), 10_000)
        assert np.all(x >= 0)

    def test_gaussian_second_moment(self):
        n = 100_000
        x = sample_move(MoveModel.gaussian(2, 4.0), np.random.default_rng(1), n)
        r2 = np.sum(x * x, axis=1)
        assert abs(r2.mean() - 0.25) < 3 * r2.std() / math.sqrt(n)

    @settings(max_examples=10, deadline=None)
    @given(st.floats(0.2, 10), st.integers(0, 2**32))
    def test_mean_statistic(self, theta, seed):
        n = 100_000
        rng = np.random.default_rng(seed)
        for m, expect in ((MoveModel.gaussian(2, theta), 2 / (2 * theta)),
                          (MoveModel.exponential(2, theta), 2 / theta)):
            s = s1(m, sample_move(m, rng, n))[:, 0]
            assert abs(s.mean() - expect) < 4 * s.std() / math.sqrt(n)


class TestModel:
    def test_gaussian_normaliser(self):
        assert MoveModel.gaussian(2, 3.0).log_normalizer() == pytest.approx(math.log(math.pi / 3))

    def test_exponential_normaliser(self):
        assert MoveModel.exponential(3, 2.0).log_normalizer() == pytest.approx(-3 * math.log(2))

    def test_invalid_theta(self):
        with pytest.raises(ValueError):
            MoveModel.gaussian(2, -1.0)
        with pytest.raises(ValueError):
            MoveModel("levy", 2)

    def test_modes(self):
        np.testing.assert_array_equal(MoveModel.gaussian(2, 1.0).mode(), [0, 0])
        np.testing.assert_array_equal(MoveModel.exponential(2, 4.0).mode(), [0.25, 0.25])
