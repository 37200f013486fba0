import math

import numpy as np
import pytest

from qnls.classify import (
    CaseTag,
    EstimateParams,
    classify_batch,
    classify_interaction,
    near_orthogonality_check,
    tag_of_code,
)
from qnls.lattice import (
    DyadicTriple,
    FreqVec,
    InteractionTriple,
    dyadic_block_of,
    dyadic_block_of_sq,
    modulation_block_of,
    modulation_block_of_value,
    sector_index_batch,
    shell_points,
)

P = EstimateParams()


def blocks_for(n1, n2, tau1, tau2):
    n = n1 - n2
    tau = tau1 - tau2
    return DyadicTriple(
        N0=dyadic_block_of(n) if not n.is_zero else 1,
        N1=dyadic_block_of(n1) if not n1.is_zero else 1,
        N2=dyadic_block_of(n2) if not n2.is_zero else 1,
        L0=modulation_block_of(tau, n),
        L1=modulation_block_of(tau1, n1),
        L2=modulation_block_of(tau2, n2),
    )


def ref_classify(n1, n2, tau1, tau2, blocks, eps):
    """Straight transcription of the decision rules, scalar and independent."""
    n = n1 - n2
    tau = tau1 - tau2
    if n.is_zero or n1.is_zero or n2.is_zero:
        return CaseTag.ZERO_MODE
    q, r = n.norm(), n2.norm()
    d = abs(n.dot(n2))
    if d >= (q**eps) * (r**eps):
        lams = [abs(tau + n.norm_sq()), abs(tau1 + n1.norm_sq()), abs(tau2 + n2.norm_sq())]
        best = max(range(3), key=lambda i: (lams[i], -i))
        return [CaseTag.NR_CASE1, CaseTag.NR_CASE2, CaseTag.NR_CASE3][best]
    if math.sqrt(q) <= r <= q * q:
        if 0.5 <= r / q <= 2.0:
            return CaseTag.R_1A
        return CaseTag.R_1B if r < q / 2 else CaseTag.R_1C
    if r > q * q:
        return CaseTag.R_2A if blocks.Lmax >= blocks.N2 else CaseTag.R_2B
    return CaseTag.R_3_HIGH if blocks.Lmax >= blocks.N0 else CaseTag.R_3_LOW


class TestExamples:
    def test_nonresonant_case1(self):
        n1, n2 = FreqVec(8, 0), FreqVec(0, 8)
        # make lambda0 the largest modulation
        t = InteractionTriple.from_legs(n1, n2, 500.0, 0.0)
        tag = classify_interaction(t, P, blocks_for(n1, n2, 500.0, 0.0))
        assert tag == CaseTag.NR_CASE1

    def test_resonant_2b(self):
        # n = (1,0), n2 = (0,40): n.n2 = 0, |n|^2 << |n2|, small modulations
        n2 = FreqVec(0, 40)
        n1 = FreqVec(1, 40)
        tau1, tau2 = -(n1.norm_sq() - 3.0), -(n2.norm_sq() - 2.0)
        t = InteractionTriple.from_legs(n1, n2, tau1, tau2)
        b = blocks_for(n1, n2, tau1, tau2)
        assert b.N2 == 64 and b.Lmax < 64
        assert classify_interaction(t, P, b) == CaseTag.R_2B

    def test_zero_mode(self):
        n1, n2 = FreqVec(0, 0), FreqVec(2, 1)
        t = InteractionTriple.from_legs(n1, n2, 1.0, 0.0)
        assert classify_interaction(t, P, blocks_for(n1, n2, 1.0, 0.0)) == CaseTag.ZERO_MODE


class TestAgainstReference:
    def test_random_triples(self):
        rng = np.random.default_rng(0)
        for _ in range(3000):
            n1 = FreqVec(int(rng.integers(-40, 41)), int(rng.integers(-40, 41)))
            n2 = FreqVec(int(rng.integers(-40, 41)), int(rng.integers(-40, 41)))
            tau1 = float(rng.integers(-2000, 2000))
            tau2 = float(rng.integers(-2000, 2000))
            b = blocks_for(n1, n2, tau1, tau2)
            t = InteractionTriple.from_legs(n1, n2, tau1, tau2)
            assert classify_interaction(t, P, b) == ref_classify(n1, n2, tau1, tau2, b, P.eps)

    def test_exhaustive_partition_scan(self):
        # every admissible triple in the scan receives exactly one tag, and
        # the batch path agrees with the scalar reference on a subsample
        ax = np.arange(-16, 17)
        n1x, n1y, n2x, n2y = [a.ravel() for a in np.meshgrid(ax, ax, ax, ax,
                                                             indexing="ij",
                                                             sparse=False)[:4]]
        rng = np.random.default_rng(1)
        tau1 = rng.integers(-20, 21, n1x.size).astype(float)
        tau2 = rng.integers(-20, 21, n1x.size).astype(float)
        q0 = (n1x - n2x).astype(float) ** 2 + (n1y - n2y).astype(float) ** 2
        q1 = n1x.astype(float) ** 2 + n1y.astype(float) ** 2
        q2 = n2x.astype(float) ** 2 + n2y.astype(float) ** 2
        N0 = dyadic_block_of_sq(q0)
        N2 = dyadic_block_of_sq(q2)
        L0 = modulation_block_of_value(np.abs(tau1 - tau2 + q0))
        L1 = modulation_block_of_value(np.abs(tau1 + q1))
        L2 = modulation_block_of_value(np.abs(tau2 + q2))
        codes = classify_batch(n1x, n1y, n2x, n2y, tau1, tau2,
                               L0, L1, L2, N0, N2, eps=P.eps)
        assert codes.shape == n1x.shape
        assert ((codes >= 0) & (codes < len(CaseTag))).all()
        # zero-mode triples tagged as such, and only those
        zero = (q0 == 0) | (q1 == 0) | (q2 == 0)
        assert (codes[zero] == 0).all()
        assert (codes[~zero] != 0).all()
        sub = rng.choice(n1x.size, size=1500, replace=False)
        for i in sub:
            n1 = FreqVec(int(n1x[i]), int(n1y[i]))
            n2 = FreqVec(int(n2x[i]), int(n2y[i]))
            b = blocks_for(n1, n2, float(tau1[i]), float(tau2[i]))
            assert tag_of_code(codes[i]) == ref_classify(
                n1, n2, float(tau1[i]), float(tau2[i]), b, P.eps
            )

    def test_max_modulation_lower_bound(self):
        # triangle inequality on the exact phase identity:
        # 9 (1 + max^2) >= 1 + (n.n2)^2 for every triple, exactly in integers
        rng = np.random.default_rng(2)
        for _ in range(20000):
            a = rng.integers(-32, 33, size=4)
            t1, t2 = int(rng.integers(-20, 21)), int(rng.integers(-20, 21))
            n1 = FreqVec(int(a[0]), int(a[1]))
            n2 = FreqVec(int(a[2]), int(a[3]))
            n = n1 - n2
            lam0 = (t1 - t2) + n.norm_sq()
            lam1 = t1 + n1.norm_sq()
            lam2 = t2 + n2.norm_sq()
            mx = max(abs(lam0), abs(lam1), abs(lam2))
            d = n.dot(n2)
            assert 9 * (1 + mx * mx) >= 1 + d * d


class TestNearOrthogonality:
    def test_examples(self):
        assert near_orthogonality_check(FreqVec(1, 0), FreqVec(0, 5), 0.3)
        assert near_orthogonality_check(FreqVec(1, 0), FreqVec(1, 0), 0.1)

    def test_exhaustive_scan(self):
        cap = 64
        ax = np.arange(-cap, cap + 1)
        px, py = np.meshgrid(ax, ax, indexing="ij")
        keep = (px**2 + py**2 <= cap**2) & ((px != 0) | (py != 0))
        vx, vy = px[keep].astype(float), py[keep].astype(float)
        norms = np.sqrt(vx**2 + vy**2)
        ux, uy = vx / norms, vy / norms
        for theta in (0.3, 0.1, 0.01):
            half = math.asin(theta)
            bad = 0
            for lo in range(0, len(ux), 512):
                hi = min(lo + 512, len(ux))
                cos = np.abs(ux[lo:hi, None] * ux[None, :] + uy[lo:hi, None] * uy[None, :])
                sel = cos < theta
                ang = np.arccos(np.clip(cos[sel], -1, 1))
                bad += int((np.abs(ang - math.pi / 2) > half + 1e-12).sum())
            assert bad == 0


class TestSectorPigeonhole:
    @pytest.mark.parametrize("N", [16, 32, 64])
    def test_near_resonant_pairs_hit_few_sectors(self, N):
        eps = P.eps
        width = float(N) ** (-2.0 + 2.0 * eps)
        xs, ys = shell_points(N)
        keep = (xs != 0) | (ys != 0)
        xs, ys = xs[keep].astype(float), ys[keep].astype(float)
        norms = np.sqrt(xs**2 + ys**2)
        ell = sector_index_batch(xs, ys, width)
        seen = {}
        for lo in range(0, len(xs), 512):
            hi = min(lo + 512, len(xs))
            cos = np.abs(
                (xs[lo:hi, None] * xs[None, :] + ys[lo:hi, None] * ys[None, :])
                / (norms[lo:hi, None] * norms[None, :])
            )
            ii, jj = np.nonzero(cos < width)
            for a, b in zip(ell[lo + ii], ell[jj]):
                seen.setdefault(int(a), set()).add(int(b))
        assert seen, "scan found no nearly-resonant pairs"
        assert max(len(v) for v in seen.values()) <= 8


class TestParams:
    def test_defaults_valid(self):
        p = EstimateParams()
        assert p.b_plus == pytest.approx(0.55)
        assert p.b_minus == pytest.approx(-0.42)

    def test_delta_ordering_enforced(self):
        with pytest.raises(ValueError):
            EstimateParams(delta1=0.05, delta2=0.08)
        with pytest.raises(ValueError):
            EstimateParams(delta1=0.2, delta2=0.05)
