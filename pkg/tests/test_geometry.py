import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gibbslat.geometry import (LatticeSpec, Window, border_indicator, erode, sample_shift,
                               shifted_sites)


def brute_sites(u, w, span=40):
    """All integer points i with i + u in the half-open box, by direct enumeration."""
    out = []
    for i in itertools.product(range(-span, span + 1), repeat=len(u)):
        y = np.array(i) + u
        if np.all(y >= w.lo) and np.all(y < w.hi):
            out.append(y)
    return np.array(out).reshape(-1, len(u))


class TestLatticeSpec:
    def test_cubic(self):
        lat = LatticeSpec.cubic(2)
        assert lat.dimension == 2
        assert lat.size == pytest.approx(1.0)
        assert lat.cell_volume == pytest.approx(1.0)
        assert lat.is_axis_aligned

    def test_rank_deficient_rejected(self):
        with pytest.raises(ValueError):
            LatticeSpec(((1.0, 2.0), (2.0, 4.0)))

    def test_size_of_skewed_basis(self):
        # triangular lattice: shortest vector has norm 1
        lat = LatticeSpec(((1.0, 0.0), (0.5, np.sqrt(3) / 2)))
        assert lat.size == pytest.approx(1.0)
        assert not lat.is_axis_aligned


class TestErode:
    def test_identity(self):
        w = Window.cube(8)
        assert erode(w, 0) == w

    def test_arithmetic(self):
        e = erode(Window.cube(8), 1.5)
        assert e.lower == (-6.5, -6.5) and e.upper == (6.5, 6.5)

    def test_degenerate(self):
        assert erode(Window.cube(1), 3).is_empty
        assert erode(Window.cube(1), 3).volume == 0.0

    def test_negative_radius(self):
        with pytest.raises(ValueError):
            erode(Window.cube(1), -0.1)

    @given(st.floats(0, 5), st.floats(0, 5))
    def test_composition(self, a, b):
        w = Window((-3.0, -7.0), (4.0, 6.5))
        lhs, rhs = erode(erode(w, a), b), erode(w, a + b)
        np.testing.assert_allclose(lhs.lo, rhs.lo, atol=1e-12)
        np.testing.assert_allclose(lhs.hi, rhs.hi, atol=1e-12)
        assert lhs.is_empty == rhs.is_empty or np.allclose(lhs.lo, lhs.hi)


class TestShiftedSites:
    def test_nine_points(self):
        pts = shifted_sites(LatticeSpec.cubic(2), (0, 0), Window.cube(1.5))
        assert len(pts) == 9
        assert {tuple(p) for p in pts} == set(itertools.product((-1.0, 0.0, 1.0), repeat=2))

    def test_single_cell(self):
        pts = shifted_sites(LatticeSpec.cubic(2), (0.5, 0.5), Window((0, 0), (1, 1)))
        np.testing.assert_array_equal(pts, [[0.5, 0.5]])

    def test_256_sites(self):
        w = Window.cube(8)
        pts = shifted_sites(LatticeSpec.cubic(2), (0.3, 0.7), w)
        assert len(pts) == 256
        assert len(pts) == len(brute_sites(np.array([0.3, 0.7]), w, span=10))

    def test_lexicographic_order(self):
        pts, idx = shifted_sites(LatticeSpec.cubic(2), (0.2, 0.1), Window.cube(3),
                                 return_indices=True)
        keys = [tuple(i) for i in idx]
        assert keys == sorted(keys)
        assert np.all(Window.cube(3).contains(pts))

    def test_random_counts_match_brute_force(self):
        rng = np.random.default_rng(11)
        lat = LatticeSpec.cubic(2)
        for _ in range(1000):
            u = rng.random(2)
            lo = rng.uniform(-6, 3, 2)
            w = Window(lo, lo + rng.uniform(0, 5, 2))
            got = shifted_sites(lat, u, w)
            assert len(got) == len(brute_sites(u, w, span=8))

    def test_skewed_lattice(self):
        lat = LatticeSpec(((1.0, 0.0), (0.5, 1.0)))
        w = Window.cube(4)
        pts = shifted_sites(lat, (0.1, 0.2), w)
        brute = []
        for a, b in itertools.product(range(-12, 13), repeat=2):
            y = a * lat.matrix[0] + b * lat.matrix[1] + np.array([0.1, 0.2])
            if w.contains(y):
                brute.append(y)
        assert len(pts) == len(brute)

    def test_empty_window(self):
        assert len(shifted_sites(LatticeSpec.cubic(2), (0, 0), Window((1, 1), (0, 0)))) == 0


class TestSampleShift:
    def test_support_1d(self):
        rng = np.random.default_rng(0)
        u = np.array([sample_shift(LatticeSpec.cubic(1), rng) for _ in range(1000)])
        assert np.all((u >= 0) & (u < 1))

    def test_mean(self):
        rng = np.random.default_rng(1)
        n = 100_000
        u = np.array([sample_shift(LatticeSpec.cubic(2), rng) for _ in range(n)])
        se = np.sqrt(1 / 12 / n)
        assert np.all(np.abs(u.mean(axis=0) - 0.5) < 3 * se)

    def test_zero_rng(self):
        class Zero:
            def random(self, n):
                return np.zeros(n)

        np.testing.assert_array_equal(sample_shift(LatticeSpec.cubic(2), Zero()), [0.0, 0.0])

    def test_chi_square_uniformity(self):
        rng = np.random.default_rng(2)
        u = np.array([sample_shift(LatticeSpec.cubic(2), rng) for _ in range(100_000)])
        counts, _, _ = np.histogram2d(u[:, 0], u[:, 1], bins=10, range=[[0, 1], [0, 1]])
        assert stats.chisquare(counts.ravel()).pvalue > 0.01

    def test_in_fundamental_domain(self):
        lat = LatticeSpec(((1.0, 0.0), (0.5, 1.0)))
        rng = np.random.default_rng(3)
        for _ in range(100):
            assert lat.in_fundamental_domain(sample_shift(lat, rng))


class TestBorderIndicator:
    w = Window.cube(8)

    def test_interior(self):
        assert border_indicator((0, 0), (0.1, 0), self.w, 2, 0.5) == 1

    def test_site_outside_inner(self):
        assert border_indicator((7, 0), (0, 0), self.w, 2, 0.5) == 0

    def test_point_outside_outer(self):
        assert border_indicator((5, 0), (3, 0), self.w, 2, 0.5) == 0

    @settings(max_examples=200)
    @given(st.lists(st.floats(-9, 9), min_size=2, max_size=2),
           st.lists(st.floats(-4, 4), min_size=2, max_size=2))
    def test_first_clause_independent_of_move(self, i, x):
        if border_indicator(i, x, self.w, 2, 0.5) == 1:
            assert border_indicator(i, (0, 0), self.w, 2, 0.5) == 1

    def test_vectorised(self):
        i = np.array([[0, 0], [7, 0], [5, 0]], dtype=float)
        x = np.array([[0.1, 0], [0, 0], [3, 0]])
        np.testing.assert_array_equal(border_indicator(i, x, self.w, 2, 0.5), [1, 0, 0])


class TestWindow:
    def test_half_open(self):
        w = Window((0, 0), (1, 1))
        assert w.contains((0.0, 0.0))
        assert not w.contains((1.0, 0.5))

    def test_round_trip(self):
        w = Window((-1.5, 2.0), (3.0, 4.0))
        assert Window.from_dict(w.to_dict()) == w

    def test_margin(self):
        assert Window.cube(5).margin_inside(Window.cube(8)) == pytest.approx(3.0)
