import math

import numpy as np
import pytest

from qnls.fields import (
    FOURIER,
    SpaceGrid,
    SpacetimeField,
    SpatialField,
    TimeWindow,
    free_orbit,
    l2_spacetime,
    to_physical,
)
from qnls.norms import (
    COSINE_TAPER,
    SMOOTH_BUMP,
    CutoffProfile,
    XsbParams,
    bracket,
    cutoff_kernel,
    lp_spacetime_norm,
    xsb_norm,
    xsb_restriction_norm_ub,
)

GRID = SpaceGrid(16, 16)
WIN = TimeWindow(2 * math.pi, 64)


def random_field(seed, grid=GRID, window=WIN):
    rng = np.random.default_rng(seed)
    shape = (window.Mt, grid.Mx, grid.My)
    return SpacetimeField(grid, window,
                          rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


class TestXsb:
    def test_single_coefficient_closed_form(self):
        f = SpacetimeField.zeros(GRID, WIN, rep=FOURIER)
        coeffs = f.coeffs.copy()
        # tau index 35 -> tau* = 3; n = (2, 1)
        coeffs[35, GRID.Mx // 2 + 2, GRID.My // 2 + 1] = 1.0
        f = SpacetimeField(GRID, WIN, coeffs, FOURIER)
        s, b = 0.3, 0.7
        expected = bracket(math.sqrt(5)) ** s * bracket(3 + 5) ** b * math.sqrt(WIN.dtau)
        assert xsb_norm(f, XsbParams(s, b)) == pytest.approx(float(expected), rel=1e-13)

    def test_zero_exponents_recover_l2(self):
        f = random_field(0)
        assert xsb_norm(f, XsbParams(0, 0)) == pytest.approx(l2_spacetime(f), rel=1e-12)

    def test_doubling_b_scales_by_weight(self):
        # tailor the window so a grid point has <tau + |n|^2> exactly 4
        win = TimeWindow(2 * math.pi / math.sqrt(15.0), 16)
        grid = SpaceGrid(4, 4)
        f = SpacetimeField.zeros(grid, win, rep=FOURIER)
        c = f.coeffs.copy()
        c[win.Mt // 2 + 1, grid.Mx // 2, grid.My // 2] = 2.3  # lambda = sqrt(15)
        f = SpacetimeField(grid, win, c, FOURIER)
        b = 0.37
        ratio = xsb_norm(f, XsbParams(0, 2 * b)) / xsb_norm(f, XsbParams(0, b))
        assert ratio == pytest.approx(4.0**b, rel=1e-12)


class TestRestrictionUb:
    def test_zero_outside_cutoff_support(self):
        # field supported where eta vanishes (|t| > 2T with T = Twin/8)
        T = WIN.Twin / 8
        t = WIN.t_axis
        vals = np.zeros((WIN.Mt, GRID.Mx, GRID.My), dtype=complex)
        vals[np.abs(t) > 2 * T + 2 * WIN.dt] = 1.0
        f = SpacetimeField(GRID, WIN, vals)
        ub = xsb_restriction_norm_ub(f, XsbParams(0, 0.55), T, CutoffProfile(SMOOTH_BUMP, T))
        assert ub < 1e-14

    def test_free_evolution_dominates_l2(self):
        rng = np.random.default_rng(3)
        phi = SpatialField(GRID, rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16)))
        win = TimeWindow(2 * math.pi, 512)
        u = free_orbit(phi, win)
        ub = xsb_restriction_norm_ub(u, XsbParams(0, 0.55), 1.0, CutoffProfile(SMOOTH_BUMP, 1.0))
        assert ub >= phi.l2() - 1e-8

    def test_cutoff_shape_agreement_within_factor(self):
        win = TimeWindow(2 * math.pi, 128)
        grid = SpaceGrid(8, 8)
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(100):
            vals = rng.standard_normal((win.Mt, 8, 8)) + 1j * rng.standard_normal((win.Mt, 8, 8))
            f = SpacetimeField(grid, win, vals)
            a = xsb_restriction_norm_ub(f, XsbParams(0, 0.55), 1.0, CutoffProfile(SMOOTH_BUMP))
            b = xsb_restriction_norm_ub(f, XsbParams(0, 0.55), 1.0, CutoffProfile(COSINE_TAPER))
            worst = max(worst, a / b, b / a)
        assert worst <= 3.0

    def test_oversized_T_rejected(self):
        f = random_field(1)
        with pytest.raises(ValueError):
            xsb_restriction_norm_ub(f, XsbParams(0, 0.55), WIN.Twin, CutoffProfile())

    def test_linear_estimate_uniform_constant(self):
        # homogeneous linear bound: UB(free evolution) <= C_lin * ||phi||_{H^s}
        win = TimeWindow(2 * math.pi, 256)
        grid = SpaceGrid(8, 8)
        cut = CutoffProfile(SMOOTH_BUMP, 1.0)
        b = 0.55
        rng = np.random.default_rng(17)
        for s in (0.0, 0.5, 1.0):
            ratios = []
            for _ in range(1000):
                phi = SpatialField(grid, rng.standard_normal((8, 8))
                                   + 1j * rng.standard_normal((8, 8)))
                u = free_orbit(phi, win)
                ratios.append(
                    xsb_restriction_norm_ub(u, XsbParams(s, b), 1.0, cut) / phi.hs_norm(s)
                )
            ratios = np.asarray(ratios)
            assert ratios.max() < 10.0
            # one constant: the spread across random data stays narrow
            assert ratios.max() / ratios.min() < 1.5


class TestLp:
    def test_constant_field(self):
        f = SpacetimeField(GRID, WIN, np.ones((WIN.Mt, 16, 16), dtype=complex))
        for p in (2, 3, 4):
            assert lp_spacetime_norm(f, p, (0.0, 1.0)) == pytest.approx(1.0, rel=1e-12)

    def test_plane_wave(self):
        u = free_orbit(SpatialField.single_mode(GRID, 2, -1), WIN)
        for p in (2, 3, 4):
            assert lp_spacetime_norm(u, p, (0.0, 1.0)) == pytest.approx(1.0, rel=1e-12)

    def test_p2_matches_parseval(self):
        f = random_field(9)
        byquad = lp_spacetime_norm(f, 2)
        byparseval = xsb_norm(f, XsbParams(0, 0))
        assert byquad == pytest.approx(byparseval, rel=1e-6)

    def test_bad_p_rejected(self):
        with pytest.raises(ValueError):
            lp_spacetime_norm(random_field(2), 5)


class TestCutoffKernel:
    def test_multiplication_equals_convolution(self):
        # multiplying by eta on the grid == convolving tau-coefficients with
        # taps, provided the grid leaves room for the spread tau support
        win = TimeWindow(2 * math.pi, 2048)
        grid = SpaceGrid(4, 4)
        rng = np.random.default_rng(21)
        spec0 = np.zeros((win.Mt, 4, 4), dtype=complex)
        band = slice(win.Mt // 2 - 32, win.Mt // 2 + 32)
        spec0[band] = rng.standard_normal((64, 4, 4)) + 1j * rng.standard_normal((64, 4, 4))
        f = SpacetimeField(grid, win, spec0, FOURIER)
        direct = xsb_restriction_norm_ub(f, XsbParams(0, 0.4), 1.0, CutoffProfile(SMOOTH_BUMP))
        from qnls.fields import time_to_fourier, time_modes, FOURIER as FR

        offs, taps = cutoff_kernel(SMOOTH_BUMP, 1.0, win.Twin)
        spec = time_to_fourier(time_modes(f), win)
        out = np.zeros_like(spec)
        for off, tap in zip(offs, taps):
            lo, hi = max(0, -off), min(win.Mt, win.Mt - off)
            if lo >= hi:
                continue
            out[lo + off:hi + off] += tap * spec[lo:hi]
        conv = SpacetimeField(grid, win, out, FR)
        assert xsb_norm(conv, XsbParams(0, 0.4)) == pytest.approx(direct, rel=1e-9)

    def test_kernel_mass(self):
        offs, taps = cutoff_kernel(SMOOTH_BUMP, 1.0, 2 * math.pi)
        # eta(0) = 1 is the sum of the series at t = 0
        assert np.sum(taps).real == pytest.approx(1.0, abs=1e-10)
        assert np.abs(np.sum(taps).imag) < 1e-12
