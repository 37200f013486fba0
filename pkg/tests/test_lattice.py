import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qnls.lattice import (
    UNIT_TORUS,
    AngularSector,
    CountingInstance,
    DyadicTriple,
    FreqVec,
    InteractionTriple,
    TorusGeometry,
    counting_bound,
    counting_count,
    dyadic_block_of,
    dyadic_block_of_sq,
    modulation_block_of,
    modulation_block_of_value,
    phase_sum,
    sector_index,
    sector_index_batch,
    shell_points,
    spatial_block_contains,
)

dyadics = st.integers(min_value=0, max_value=12).map(lambda e: 2**e)
small_ints = st.integers(min_value=-64, max_value=64)


class TestDyadicBlocks:
    def test_examples(self):
        assert dyadic_block_of(FreqVec(3, 0)) == 4
        assert dyadic_block_of(FreqVec(0, 0)) == 1
        assert dyadic_block_of(FreqVec(1, 1)) == 2

    @given(small_ints, small_ints)
    def test_partition(self, a, b):
        n = FreqVec(a, b)
        N = dyadic_block_of(n)
        q = n.norm_sq()
        if N == 1:
            assert q <= 1
        else:
            assert (N / 2) ** 2 < q <= N**2
        # no other block contains n
        hits = [M for M in (1, 2, 4, 8, 16, 32, 64, 128)
                if spatial_block_contains(M, q)]
        assert hits == [N]

    def test_vectorized_matches_scalar(self):
        pts = np.arange(0, 40)
        blocks = dyadic_block_of_sq(pts.astype(float) ** 2)
        for k, b in zip(pts, blocks):
            assert dyadic_block_of(FreqVec(int(k), 0)) == b

    def test_anisotropic(self):
        geom = TorusGeometry(2.0, 1.0)
        # |n|_a = 3/2 for n = (3, 0)
        assert dyadic_block_of(FreqVec(3, 0), geom) == 2


class TestModulationBlocks:
    def test_examples(self):
        assert modulation_block_of(-5.0, FreqVec(1, 0)) == 4
        assert modulation_block_of(-1.0, FreqVec(1, 0)) == 1
        assert modulation_block_of(0.0, FreqVec(2, 1)) == 8

    @given(st.floats(min_value=-5000, max_value=5000), small_ints, small_ints)
    def test_partition(self, tau, a, b):
        n = FreqVec(a, b)
        L = modulation_block_of(tau, n)
        lam = abs(tau + n.norm_sq())
        if L == 1:
            assert lam <= 1
        else:
            assert L / 2 < lam <= L

    def test_boundary_powers(self):
        for L in (1, 2, 4, 8, 16, 1024):
            assert modulation_block_of_value(float(L)) == L
            assert modulation_block_of_value(float(L) + 1e-9) == 2 * L


class TestPhaseSum:
    def test_examples(self):
        t = InteractionTriple.from_legs(FreqVec(1, 0), FreqVec(0, 1), 0.0, 0.0)
        assert phase_sum(t) == 2.0  # -2 n.n2 with n = (1, -1), n2 = (0, 1)
        t = InteractionTriple.from_legs(FreqVec(5, -3), FreqVec(0, 0), 0.0, 0.0)
        assert phase_sum(t) == 0.0

    def test_exhaustive_small_scan_exact(self):
        rng = range(-8, 9)
        for a1 in rng:
            for b1 in rng:
                n1 = FreqVec(a1, b1)
                for a2 in (-8, -3, 0, 5, 8):
                    for b2 in (-8, -1, 2, 8):
                        n2 = FreqVec(a2, b2)
                        for tau1, tau2 in ((0, 0), (-10, 7), (3, -4)):
                            t = InteractionTriple.from_legs(n1, n2, tau1, tau2)
                            n = n1 - n2
                            assert phase_sum(t) == -2.0 * (
                                n.n1 * n2.n1 + n.n2 * n2.n2
                            )

    @given(small_ints, small_ints, small_ints, small_ints,
           st.integers(-100, 100), st.integers(-100, 100))
    def test_sum_convention(self, a1, b1, a2, b2, tau1, tau2):
        n1, n2 = FreqVec(a1, b1), FreqVec(a2, b2)
        t = InteractionTriple.from_legs(n1, n2, float(tau1), float(tau2), "sum")
        assert phase_sum(t) == 2.0 * (n1.n1 * n2.n1 + n1.n2 * n2.n2)

    def test_integer_taus_give_even_integers(self):
        t = InteractionTriple.from_legs(FreqVec(3, 2), FreqVec(-1, 4), -7.0, 2.0)
        v = phase_sum(t)
        assert v == int(v) and int(v) % 2 == 0

    def test_anisotropic_identity(self):
        geom = TorusGeometry(2.0, 0.5)
        n1, n2 = FreqVec(3, -2), FreqVec(1, 5)
        t = InteractionTriple.from_legs(n1, n2, 0.25, -1.5)
        n = n1 - n2
        expected = -2.0 * geom.dot(n.n1, n.n2, n2.n1, n2.n2)
        assert phase_sum(t, geom) == pytest.approx(expected, abs=1e-12)

    def test_constraint_violation_rejected(self):
        with pytest.raises(ValueError):
            InteractionTriple(0.0, 1.0, 0.0, FreqVec(1, 0), FreqVec(1, 0), FreqVec(0, 0))


class TestDyadicTriple:
    @given(dyadics, dyadics, dyadics, dyadics, dyadics, dyadics)
    def test_med_between_min_and_max(self, a, b, c, d, e, f):
        t = DyadicTriple(a, b, c, d, e, f)
        assert t.Lmin <= t.Lmed <= t.Lmax
        assert t.Lmin * t.Lmed * t.Lmax == t.L0 * t.L1 * t.L2

    def test_rejects_non_dyadic(self):
        with pytest.raises(ValueError):
            DyadicTriple(3, 1, 1, 1, 1, 1)


class TestSectors:
    def test_examples(self):
        assert sector_index(FreqVec(1, 0), math.pi / 2) == 0
        assert sector_index(FreqVec(0, 1), math.pi / 2) == 1
        # arg(-1, -1) = 5*pi/4; recompute the derived index directly
        expected = math.floor((math.pi + math.pi / 4) / 0.01)
        assert expected == 392
        assert sector_index(FreqVec(-1, -1), 0.01) == 392

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            sector_index(FreqVec(0, 0), 0.1)

    @given(small_ints, small_ints, st.floats(min_value=0.01, max_value=3.0))
    def test_partition(self, a, b, width):
        if a == 0 and b == 0:
            return
        n = FreqVec(a, b)
        ell = sector_index(n, width)
        assert 0 <= ell < math.ceil(2 * math.pi / width)
        assert ell * width <= n.arg() < (ell + 1) * width

    def test_batch_matches_scalar(self):
        xs, ys = shell_points(8)
        idx = sector_index_batch(xs, ys, 0.3)
        for x, y, e in zip(xs[:50], ys[:50], idx[:50]):
            assert sector_index(FreqVec(int(x), int(y)), 0.3) == e

    def test_sector_membership(self):
        sec = AngularSector(N=4, width=math.pi / 2, ell=0)
        assert sec.contains(FreqVec(3, 1))
        assert not sec.contains(FreqVec(-3, 1))
        assert not sec.contains(FreqVec(1, 0))  # wrong shell


def _counting_oracle(inst: CountingInstance) -> int:
    """Independent brute-force count over the full bounding square.

    Works in polar coordinates of the back-rotated point, with no shared
    code with counting_count.
    """
    cap = int(math.ceil(inst.N + inst.mu)) + 2
    count = 0
    c, s = math.cos(inst.rotation), math.sin(inst.rotation)
    for p1 in range(-cap, cap + 1):
        for p2 in range(-cap, cap + 1):
            r = math.hypot(p1, p2)
            if r < inst.N or r > inst.N + inst.mu:
                continue
            q1 = c * p1 + s * p2
            if not (inst.M <= q1 <= inst.M + inst.nu):
                continue
            ang = math.acos(min(1.0, max(-1.0, q1 / r)))
            if inst.alpha_angle / 2 <= ang <= 2 * inst.alpha_angle:
                count += 1
    return count


class TestCounting:
    def test_bound_examples(self):
        inst = CountingInstance(N=100, mu=1, nu=1)
        assert counting_bound(inst) == pytest.approx(8 / math.pi + 1, abs=1e-12)
        assert counting_bound(CountingInstance(N=100, mu=0, nu=0)) == pytest.approx(1.0)
        assert counting_bound(
            CountingInstance(N=100, mu=2, nu=3, alpha_angle=0.1)
        ) == pytest.approx(93.0)

    def test_degenerate_annulus_empty(self):
        inst = CountingInstance(N=10.5, mu=1e-9, nu=1e-9, M=0.5)
        assert counting_count(inst) == 0

    def test_against_oracle_unrotated(self):
        inst = CountingInstance(N=100, mu=1, nu=1, M=0, alpha_angle=math.pi / 4)
        k = counting_count(inst)
        assert k == _counting_oracle(inst)
        assert k == 6  # (0,+-100), (0,+-101), (1,+-100)
        assert not inst.hypothesis_ok()  # N too small for alpha = pi/4 at 1/8 strictness

    @pytest.mark.parametrize("rot", [0.3, 1.1, 2.0, 4.9])
    def test_against_oracle_rotated(self, rot):
        inst = CountingInstance(N=24, mu=1.0, nu=2.0, M=3.0,
                                alpha_angle=math.pi / 8, rotation=rot)
        assert counting_count(inst) == _counting_oracle(inst)

    def test_quarter_turn_symmetry(self):
        # Z^2 is invariant under quarter turns, so the count is pi/2-periodic
        # in the rotation angle.
        for rot in (0.2, 0.9, 1.4):
            a = counting_count(CountingInstance(N=32, mu=1, nu=1, rotation=rot))
            b = counting_count(
                CountingInstance(N=32, mu=1, nu=1, rotation=rot + math.pi / 2)
            )
            assert a == b

    def test_rotation_sweep_below_bound(self):
        inst0 = CountingInstance(N=64, mu=1, nu=1, M=0, alpha_angle=math.pi / 4)
        bound = counting_bound(inst0)
        counts = [
            counting_count(
                CountingInstance(N=64, mu=1, nu=1, M=0, alpha_angle=math.pi / 4,
                                 rotation=2 * math.pi * k / 64)
            )
            for k in range(64)
        ]
        assert max(counts) <= 4.0 * bound

    def test_hypothesis_gate(self):
        assert CountingInstance(N=4096, mu=1, nu=1, alpha_angle=math.pi / 4).hypothesis_ok()
        assert not CountingInstance(N=16, mu=2, nu=2, alpha_angle=math.pi / 16).hypothesis_ok()


class TestShellPoints:
    @settings(max_examples=20)
    @given(st.sampled_from([1, 2, 4, 8, 16, 32]))
    def test_shell_cardinality_matches_blocks(self, N):
        xs, ys = shell_points(N)
        q = xs.astype(float) ** 2 + ys.astype(float) ** 2
        assert spatial_block_contains(N, q).all()
        # disjoint union over blocks covers the ball of radius N
        total = sum(shell_points(M)[0].size for M in (1, 2, 4, 8, 16, 32) if M <= N)
        cap = int(N)
        ax = np.arange(-cap, cap + 1)
        px, py = np.meshgrid(ax, ax)
        inside = (px**2 + py**2) <= N**2
        assert total == int(inside.sum())
