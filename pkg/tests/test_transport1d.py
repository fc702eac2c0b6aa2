import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from radmonge.domain import ValidationError
from radmonge.transport1d import (Map1D, Measure1D, cdf_inverse, monotone_map,
                                  mu_alpha, pushforward, sobolev_cost_1d,
                                  triangle_counterexample, triangle_map)


def uniform(n=801, a=0.0, b=1.0):
    return Measure1D(grid=np.linspace(a, b, n), density=np.ones(n))


class TestCdfInverse:
    def test_uniform_half_mass(self):
        m = uniform()
        assert abs(cdf_inverse(m, 0.5) - 0.5) < 1e-12

    def test_density_r_quarter_mass(self):
        g = np.linspace(0.0, 1.0, 8001)
        m = Measure1D(grid=g, density=g)
        assert abs(cdf_inverse(m, 0.25) - 1.0 / math.sqrt(2)) < 1e-8

    def test_zero_quantile(self):
        m = uniform(a=0.3, b=0.9)
        assert cdf_inverse(m, 0.0) == 0.3

    def test_out_of_range(self):
        with pytest.raises(ValidationError):
            cdf_inverse(uniform(), 2.0)


class TestMonotoneMap:
    def test_identity(self):
        m = uniform()
        T = monotone_map(m, m)
        assert np.max(np.abs(T.values - m.grid)) < 1e-10

    def test_translation(self):
        src = uniform()
        dst = uniform(a=2.0, b=3.0)
        T = monotone_map(src, dst)
        assert np.max(np.abs(T.values - (src.grid + 2.0))) < 1e-10

    def test_annulus_closed_form(self):
        r = np.linspace(0.0, 1.0, 4001)
        src = Measure1D(grid=r, density=(4.0 / math.pi) * r)
        s = np.linspace(1.5, 2.5, 4001)
        dst = Measure1D(grid=s, density=(1.0 / math.pi) * s)
        T = monotone_map(src, dst)
        exact = np.sqrt(2.25 + 4.0 * r ** 2)
        assert np.max(np.abs(T.values[1:-1] - exact[1:-1])) < 1e-6

    def test_mass_mismatch(self):
        with pytest.raises(ValidationError):
            monotone_map(uniform(), Measure1D(grid=np.linspace(0, 1, 11),
                                              density=2 * np.ones(11)))

    @given(hst.integers(0, 2 ** 31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_nondecreasing(self, seed):
        rng = np.random.default_rng(seed)
        g = np.linspace(0.0, 1.0, 201)
        src = Measure1D(grid=g, density=0.05 + rng.random(201))
        dst_d = 0.05 + rng.random(201)
        dst = Measure1D(grid=g, density=dst_d * src.total_mass
                        / np.trapezoid(dst_d, g))
        T = monotone_map(src, dst)
        assert np.all(np.diff(T.values) >= 0.0)

    def test_composition(self):
        rng = np.random.default_rng(3)
        g = np.linspace(0.0, 1.0, 801)

        def rmeas(scale_to=None):
            m = Measure1D(grid=g, density=0.2 + rng.random(801))
            if scale_to is None:
                return m
            return Measure1D(grid=g, density=m.density * scale_to
                             / m.total_mass)

        a = rmeas()
        b = rmeas(a.total_mass)
        c = rmeas(a.total_mass)
        T_ab = monotone_map(a, b)
        T_bc = monotone_map(b, c)
        T_ac = monotone_map(a, c)
        comp = np.interp(T_ab.values, g, T_bc.values)
        cell = g[1] - g[0]
        assert np.max(np.abs(comp - T_ac.values)) <= 2.0 * cell


class TestPushforward:
    @given(hst.integers(0, 2 ** 31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_mass_conserved(self, seed):
        rng = np.random.default_rng(seed)
        g = np.linspace(0.0, 1.0, 201)
        src = Measure1D(grid=g, density=0.05 + rng.random(201))
        T = Map1D(grid=g, values=np.sort(rng.random(201)))
        out = pushforward(T, src, np.linspace(0.0, 1.0, 101))
        assert abs(out.total_mass - src.total_mass) < 1e-12 * src.total_mass

    def test_translation_image(self):
        src = uniform(n=2001)
        T = Map1D(grid=src.grid, values=src.grid + 2.0)
        out = pushforward(T, src, np.linspace(2.0, 3.0, 2001))
        interior = slice(5, -5)
        assert np.max(np.abs(out.density[interior] - 1.0)) < 5e-3

    def test_reproduces_target_under_refinement(self):
        from radmonge.transport1d import w1_cdf_distance
        errs = []
        for n in (201, 801):
            g = np.linspace(0.0, 1.0, n)
            src = Measure1D(grid=g, density=1.0 + 0.5 * np.sin(6 * g))
            dst_d = 1.0 + 0.5 * np.cos(5 * g)
            dst = Measure1D(grid=g, density=dst_d * src.total_mass
                            / np.trapezoid(dst_d, g))
            T = monotone_map(src, dst)
            errs.append(w1_cdf_distance(pushforward(T, src, g), dst))
        assert errs[1] < errs[0] / 2.0

    def test_triangle_change_of_variables(self):
        # pushforward of uniform Lebesgue by the tent map is uniform:
        # sum over the two preimages of f/|U'| = 1/2 + 1/2
        src = uniform(n=4001)
        T = Map1D(grid=src.grid, values=triangle_map(src.grid))
        out = pushforward(T, src, np.linspace(0.0, 1.0, 1001))
        interior = slice(3, -3)
        assert np.max(np.abs(out.density[interior] - 1.0)) < 1e-2


class TestSobolev:
    def test_identity(self):
        T = Map1D(grid=np.linspace(0, 1, 101), values=np.linspace(0, 1, 101))
        assert abs(sobolev_cost_1d(T) - 1.0) < 1e-12

    def test_double(self):
        g = np.linspace(0, 1, 101)
        assert abs(sobolev_cost_1d(Map1D(grid=g, values=2 * g)) - 4.0) < 1e-12

    def test_triangle(self):
        g = np.linspace(0, 1, 1001)  # odd count: node exactly at 1/2
        assert abs(sobolev_cost_1d(Map1D(grid=g, values=triangle_map(g)))
                   - 4.0) < 1e-10


class TestCounterexample:
    def test_alpha_one_cost_U(self):
        cost_U, _, _ = triangle_counterexample(1.0, 10000)
        assert abs(cost_U - 4.0) < 1e-10

    def test_alpha_ten_strict(self):
        cost_U, cost_T, margin = triangle_counterexample(10.0, 10000)
        assert abs(cost_U - 4.0) < 1e-10
        assert cost_T > 4.0
        assert margin > 0.0

    def test_margin_grows(self):
        _, _, m10 = triangle_counterexample(10.0, 10000)
        _, _, m100 = triangle_counterexample(100.0, 10000)
        assert m100 > m10

    def test_empirical_threshold_reported(self, capsys):
        # reported scan, no asserted threshold: find smallest alpha in a
        # coarse grid with positive margin
        for alpha in (1.5, 2.0, 3.0, 4.0, 6.0, 8.0):
            _, _, margin = triangle_counterexample(alpha, 4000)
            if margin > 0:
                print(f"first positive margin at alpha = {alpha}")
                break

    def test_validation(self):
        with pytest.raises(ValidationError):
            triangle_counterexample(-1.0, 10000)
        with pytest.raises(ValidationError):
            triangle_counterexample(10.0, 10)

    def test_mu_alpha_nodes_at_quarters(self):
        m = mu_alpha(10.0, 4001)
        for q in (0.25, 0.5, 0.75):
            assert np.min(np.abs(m.grid - q)) < 1e-14
