import math

import mpmath
import numpy as np
import pytest

from qnls.fields import SpaceGrid, SpatialField
from qnls.picard import (
    PicardConfig,
    duhamel_gain_trend,
    duhamel_integral,
    eval_at_grid_time,
    phi1_imag,
    phi2_imag,
    picard_iterate,
)
from qnls.fields import TimeWindow
from qnls.solver import SolverConfig, evolve, mean_ode_oracle

GRID = SpaceGrid(16, 16)


def banded_field(seed, amp=0.1):
    rng = np.random.default_rng(seed)
    m = np.zeros((16, 16), dtype=complex)
    band = slice(3, 14)  # |n_i| <= 5 = Mx//3
    m[band, band] = rng.standard_normal((11, 11)) + 1j * rng.standard_normal((11, 11))
    f = SpatialField(GRID, m)
    return SpatialField(GRID, f.modes * (amp / f.l2()))


def constant_field(c):
    m = np.zeros((16, 16), dtype=complex)
    m[8, 8] = c
    return SpatialField(GRID, m)


class TestPhiFunctions:
    @pytest.mark.parametrize("theta", [0.0, 1e-8, 1e-3, 0.3, 0.499, 0.5, 2.0, 40.0, -7.5])
    def test_against_mpmath(self, theta):
        mpmath.mp.dps = 50
        z = mpmath.mpc(0, theta)
        if theta == 0.0:
            p1, p2 = 1.0, 0.5
        else:
            p1 = complex((mpmath.e**z - 1) / z)
            p2 = complex((mpmath.e**z - 1 - z) / z**2)
        assert phi1_imag(np.array([theta]))[0] == pytest.approx(p1, abs=1e-14)
        assert phi2_imag(np.array([theta]))[0] == pytest.approx(p2, abs=1e-14)


class TestDuhamelIntegral:
    def test_constant_forcing_zero_mode(self):
        # omega = 0, F = 1: integral_0^t dt' = t
        win = TimeWindow(2 * math.pi, 256)
        F = np.ones((256, 2, 2), dtype=complex)
        omega = np.zeros((2, 2))
        out = duhamel_integral(F, omega, win)
        assert np.allclose(out[:, 0, 0], win.t_axis, atol=1e-12)

    def test_oscillatory_forcing_closed_form(self):
        # F(t) = e^{i a t}, mode omega: integral = (e^{iat} - e^{-i omega t})/(i(a+omega))
        win = TimeWindow(2 * math.pi, 1024)
        a = 3.0
        om_val = 7.0
        F = np.exp(1j * a * win.t_axis)[:, None, None] * np.ones((1, 1, 1))
        omega = np.array([[om_val]])
        out = duhamel_integral(F, omega, win)[:, 0, 0]
        t = win.t_axis
        expect = (np.exp(1j * a * t) - np.exp(-1j * om_val * t)) / (1j * (a + om_val))
        # piecewise-linear interpolation of F: second-order accurate
        assert np.max(np.abs(out - expect)) < 5e-4
        win2 = TimeWindow(2 * math.pi, 4096)
        F2 = np.exp(1j * a * win2.t_axis)[:, None, None] * np.ones((1, 1, 1))
        out2 = duhamel_integral(F2, omega, win2)[:, 0, 0]
        expect2 = (np.exp(1j * a * win2.t_axis) - np.exp(-1j * om_val * win2.t_axis)) / (
            1j * (a + om_val)
        )
        assert np.max(np.abs(out2 - expect2)) < 16 * np.max(np.abs(out - expect)) / 200


class TestPicard:
    def test_zero_data_is_fixed_point(self):
        fld, rep = picard_iterate(SpatialField.zeros(GRID), PicardConfig(T=0.1, iterations=4))
        assert all(d == 0.0 for d in rep.diffs)
        assert np.all(fld.coeffs == 0)

    def test_contraction_small_data(self):
        phi = banded_field(7, amp=0.1)
        fld, rep = picard_iterate(phi, PicardConfig(T=0.1, iterations=8))
        assert not rep.contraction_failure
        assert all(r <= 0.5 for r in rep.ratios[:4])

    def test_constant_data_matches_oracle(self):
        fld, rep = picard_iterate(constant_field(0.05j), PicardConfig(T=0.12, iterations=10))
        tq = fld.window.dt * 16  # ~0.098, inside [0, T]
        snap = eval_at_grid_time(fld, tq)
        assert abs(snap.mean() - mean_ode_oracle(0.05j, tq)) < 1e-6
        off = snap.modes.copy()
        off[8, 8] = 0
        assert np.max(np.abs(off)) < 1e-12

    def test_agreement_with_strang(self):
        phi = banded_field(7, amp=0.1)
        fld, _ = picard_iterate(phi, PicardConfig(T=0.1, iterations=8))
        win = fld.window
        for k in (8, 16):
            tq = win.dt * k
            snap = eval_at_grid_time(fld, tq)
            traj = evolve(SolverConfig(GRID, dt=tq / 400, Tend=tq), phi)
            diff = float(np.linalg.norm(snap.modes - traj.states[-1].modes))
            assert diff < 1e-4

    def test_divergence_reported_for_large_data(self):
        phi = banded_field(9, amp=40.0)
        _, rep = picard_iterate(phi, PicardConfig(T=1.0, iterations=12))
        assert rep.contraction_failure


class TestDuhamelTrend:
    def test_reports_finite_slope(self):
        out = duhamel_gain_trend(seed=2, Mt=256)
        assert np.isfinite(out["slope"])
        assert all(np.isfinite(r) and r > 0 for _, r in out["table"])
