import math

import numpy as np
import pytest

from radmonge.domain import AngularGrid, ValidationError
from radmonge.obstacle import (Curve, G_value, cosh_bridge, h1_inner,
                               projection_gap, solve_obstacle)

K_EXACT = 9.0 * math.pi / 8.0


def notched_obstacle(n):
    """R1 = 1.5 minus a smooth bump supported in (pi/6, pi/3)."""
    g = AngularGrid.make(n)
    a, b = math.pi / 6.0, math.pi / 3.0
    s = np.clip((g.nodes - a) / (b - a), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        bump = np.where((g.nodes > a) & (g.nodes < b),
                        np.exp(-1.0 / np.maximum(s * (1.0 - s), 1e-300)), 0.0)
    bump = bump / bump.max()
    return g, 1.5 - 0.3 * bump


class TestSolveObstacle:
    def test_constant_obstacle(self):
        g = AngularGrid.make(2001)
        res = solve_obstacle(Curve(theta=g, values=np.full(2001, 1.5)))
        assert np.allclose(res.Phi.values, 1.5)
        assert abs(res.K - K_EXACT) / K_EXACT < 1e-4
        assert res.kkt_residual < 1e-9

    def test_zero_obstacle(self):
        g = AngularGrid.make(201)
        res = solve_obstacle(Curve(theta=g, values=np.zeros(201)))
        assert res.K < 1e-12
        assert np.max(np.abs(res.Phi.values)) < 1e-10

    def test_feasibility_exact(self):
        g, R1 = notched_obstacle(501)
        res = solve_obstacle(Curve(theta=g, values=R1))
        assert np.all(res.Phi.values >= R1)

    def test_notched_cosh_bridge(self):
        g, R1 = notched_obstacle(2001)
        res = solve_obstacle(Curve(theta=g, values=R1))
        inactive = np.flatnonzero(~res.active)
        assert len(inactive) > 10
        segs = np.split(inactive, np.flatnonzero(np.diff(inactive) > 1) + 1)
        th = g.nodes
        for seg in segs:
            i0, i1 = seg[0] - 1, seg[-1] + 1
            assert 0 <= i0 and i1 < g.n_theta
            bridge = cosh_bridge(th[seg], th[i0], res.Phi.values[i0],
                                 th[i1], res.Phi.values[i1])
            assert np.max(np.abs(bridge - res.Phi.values[seg])) < 1e-4

    def test_complementary_slackness(self):
        g, R1 = notched_obstacle(1001)
        res = solve_obstacle(Curve(theta=g, values=R1))
        slack = (res.Phi.values - R1) * res.multiplier
        assert np.max(np.abs(slack)) < 1e-8

    def test_K_monotone_in_obstacle(self):
        g, R1 = notched_obstacle(501)
        K_low = solve_obstacle(Curve(theta=g, values=R1)).K
        K_high = solve_obstacle(Curve(theta=g, values=np.full(501, 1.5))).K
        assert K_low < K_high

    def test_grid_convergence(self):
        Ks = {n: solve_obstacle(Curve(theta=notched_obstacle(n)[0],
                                      values=notched_obstacle(n)[1])).K
              for n in (251, 501, 1001)}
        d1 = abs(Ks[501] - Ks[251])
        d2 = abs(Ks[1001] - Ks[501])
        assert d2 < d1  # refinement shrinks the increment
        assert 2.0 <= d1 / d2 <= 8.0  # consistent with second order


class TestH1Form:
    def test_inner_is_norm(self):
        g = AngularGrid.make(257)
        c = Curve(theta=g, values=np.sin(g.nodes))
        assert abs(h1_inner(c, c) - c.h1_norm_sq()) < 1e-14

    def test_constants(self):
        g = AngularGrid.make(257)
        one = Curve(theta=g, values=np.ones(257))
        assert abs(h1_inner(one, one) - math.pi / 2.0) < 1e-12

    def test_sin_cos_orthogonal(self):
        g = AngularGrid.make(4001)
        a = Curve(theta=g, values=np.sin(g.nodes))
        b = Curve(theta=g, values=np.cos(g.nodes))
        assert abs(h1_inner(a, b)) < 1e-6

    def test_grid_mismatch(self):
        a = Curve(theta=AngularGrid.make(11), values=np.zeros(11))
        b = Curve(theta=AngularGrid.make(12), values=np.zeros(12))
        with pytest.raises(ValidationError):
            h1_inner(a, b)


@pytest.fixture(scope="module")
def solved():
    g = AngularGrid.make(129)
    R1 = Curve(theta=g, values=np.full(129, 1.5))
    return g, R1, solve_obstacle(R1)


class TestProjection:
    def test_G_at_Phi(self, solved):
        _, _, res = solved
        assert abs(G_value(res.Phi, res.K)) < 1e-12

    def test_G_scaling(self, solved):
        g, _, res = solved
        two = Curve(theta=g, values=2.0 * res.Phi.values)
        assert abs(G_value(two, res.K) - 3.0 * res.K) < 1e-10

    def test_G_shift(self, solved):
        g, _, res = solved
        one = Curve(theta=g, values=np.ones(129))
        shifted = Curve(theta=g, values=res.Phi.values + 1.0)
        expected = 2.0 * h1_inner(res.Phi, one) + math.pi / 2.0
        assert abs(G_value(shifted, res.K) - expected) < 1e-10

    def test_gap_zero_at_Phi(self, solved):
        _, _, res = solved
        assert abs(projection_gap(res.Phi, res.Phi, res.K)) < 1e-12

    def test_gap_constant_shift(self, solved):
        g, _, res = solved
        one = Curve(theta=g, values=np.ones(129))
        shifted = Curve(theta=g, values=res.Phi.values + 0.7)
        gap = projection_gap(shifted, res.Phi, res.K)
        assert abs(gap - 2.0 * 0.7 * h1_inner(res.Phi, one)) < 1e-10

    def test_gap_random_feasible_suite(self, solved):
        g, R1, res = solved
        rng = np.random.default_rng(7)
        th = g.nodes
        modes = np.stack([np.cos(2 * k * th) + 1.0 for k in range(1, 5)])
        worst = np.inf
        for _ in range(1000):
            coeff = rng.random(4) * 0.3
            phi = Curve(theta=g, values=res.Phi.values + coeff @ modes)
            worst = min(worst, projection_gap(phi, res.Phi, res.K, R1=R1))
        assert worst >= -1e-8

    def test_infeasible_rejected(self, solved):
        g, R1, res = solved
        low = Curve(theta=g, values=res.Phi.values - 0.1)
        with pytest.raises(ValidationError):
            projection_gap(low, res.Phi, res.K, R1=R1)
