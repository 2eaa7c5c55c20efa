import math

import numpy as np
import pytest
import scipy.integrate
import scipy.special

from stefancut import analytic
from stefancut.errors import DomainError, NoRoot


def e1_quadrature(x):
    """Independent oracle: adaptive quadrature of the defining integral."""
    val, _ = scipy.integrate.quad(lambda t: math.exp(-x * t) / t, 1.0, np.inf,
                                  limit=200)
    return val


class TestExpIntegral:
    @pytest.mark.parametrize("x", [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0])
    def test_against_quadrature(self, x):
        assert analytic.exp_integral_e1(x) == pytest.approx(
            e1_quadrature(x), rel=1e-10)

    def test_e1_of_one(self):
        assert analytic.exp_integral_e1(1.0) == pytest.approx(
            e1_quadrature(1.0), rel=1e-10)
        assert analytic.exp_integral_e1(1.0) == pytest.approx(0.219383934, abs=1e-9)

    def test_small_x_log_expansion(self):
        x = 1e-6
        expected = -analytic.EULER_GAMMA - math.log(x)
        assert analytic.exp_integral_e1(x) == pytest.approx(expected, rel=1e-5)

    def test_monotone_decreasing(self):
        assert analytic.exp_integral_e1(2.0) < analytic.exp_integral_e1(1.0)

    def test_domain(self):
        with pytest.raises(DomainError):
            analytic.exp_integral_e1(0.0)
        with pytest.raises(DomainError):
            analytic.exp_integral_e1(-1.0)


class TestErf:
    def test_against_scipy(self):
        xs = np.linspace(-6.5, 6.5, 301)
        ours = analytic.erf(xs)
        ref = scipy.special.erf(xs)
        assert np.max(np.abs(ours - ref)) <= 1e-12

    def test_scalar_path(self):
        assert analytic.erf(0.9) == pytest.approx(scipy.special.erf(0.9),
                                                  abs=1e-13)


class TestFrankParameters:
    def test_reported_value(self):
        s = analytic.frank_parameters(-0.5)
        assert s == pytest.approx(1.56, abs=0.01)

    def test_residual(self):
        s = analytic.frank_parameters(-0.5)
        assert abs(analytic.frank_far_temperature(s) - (-0.5)) <= 1e-10

    def test_monotone_in_undercooling(self):
        ss = [analytic.frank_parameters(t) for t in (-0.3, -0.5, -0.7)]
        assert ss[0] < ss[1] < ss[2]

    def test_invalid_input(self):
        with pytest.raises(NoRoot):
            analytic.frank_parameters(0.2)
        with pytest.raises(NoRoot):
            analytic.frank_parameters(-1.5)


def fd_heat_residual(sol, pts, t, diffusivity=1.0, h=1e-4, dt=1e-5):
    """|T_t - D lap T| by central differences at the given points."""
    res = []
    for (x, y) in pts:
        tt = (sol.temperature(x, y, t + dt) - sol.temperature(x, y, t - dt)) / (2 * dt)
        lap = (sol.temperature(x + h, y, t) + sol.temperature(x - h, y, t)
               + sol.temperature(x, y + h, t) + sol.temperature(x, y - h, t)
               - 4.0 * sol.temperature(x, y, t)) / h ** 2
        res.append(abs(tt - diffusivity * lap))
    return max(res)


class TestReferenceSolutions:
    def test_planar_interface_value(self):
        sol = analytic.PlanarStefan(velocity=1.0)
        t = 0.37
        assert sol.temperature(sol.interface_position(t), 0.0, t) == 0.0

    def test_planar_pde_residual(self):
        sol = analytic.PlanarStefan(velocity=1.0)
        pts = [(x, 0.0) for x in (0.6, 0.9, 1.4)]
        assert fd_heat_residual(sol, pts, t=0.25) <= 1e-4

    def test_crank_interface_value(self):
        sol = analytic.CrankLayer(lam=0.9)
        t = 0.05
        y = sol.interface_position(t)
        assert abs(sol.temperature(0.0, y, t)) <= 1e-12

    def test_crank_pde_residual(self):
        sol = analytic.CrankLayer(lam=0.9)
        t = 0.06
        yf = sol.interface_position(t)
        pts = [(0.0, y) for y in (yf + 0.05, yf + 0.15, 0.95)]
        assert fd_heat_residual(sol, pts, t=t) <= 1e-4

    def test_frank_pde_residual(self):
        sol = analytic.FrankSphere(t_inf=-0.5)
        t = 1.5
        rf = sol.interface_position(t)
        pts = [(rf + 0.3, 0.0), (rf + 1.0, 0.4), (0.3, rf + 0.8)]
        assert fd_heat_residual(sol, pts, t=t) <= 1e-4

    def test_frank_value_from_e1(self):
        # value fixed by the E1 oracle at s = 2, t arbitrary
        sol = analytic.FrankSphere(t_inf=-0.5)
        s_g = sol.s_growth
        expect = -0.5 * (1.0 - e1_quadrature(1.0) / e1_quadrature(s_g ** 2 / 4))
        t = 4.0
        got = sol.temperature(2.0 * math.sqrt(t), 0.0, t)
        assert got == pytest.approx(expect, rel=1e-9)

    def test_frank_stefan_condition(self):
        # dR/dt from the closed form equals the (liquid) gradient jump
        sol = analytic.FrankSphere(t_inf=-0.5)
        for t in (1.0, 1.7, 2.4):
            drdt = sol.s_growth / (2.0 * math.sqrt(t))
            r = sol.interface_position(t)
            h = 1e-6
            grad_l = (sol.liquid_temperature(r + h, 0.0, t)
                      - sol.liquid_temperature(r - h, 0.0, t)) / (2 * h)
            assert abs(drdt - (-grad_l)) <= 1e-6 * max(1.0, drdt)

    def test_curvature_flow_circle(self):
        sol = analytic.CurvatureFlowCircle(0.45)
        assert sol.interface_position(0.0) == pytest.approx(0.45)
        assert sol.interface_position(0.05) == pytest.approx(
            math.sqrt(0.45 ** 2 - 0.1))
        with pytest.raises(DomainError):
            sol.interface_position(1.0)
