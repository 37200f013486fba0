"""Resonant/non-resonant classification of frequency-modulation triples.

A triple ((tau, n), (tau1, n1), (tau2, n2)) with n = n1 - n2, tau = tau1 -
tau2 is non-resonant when |<n, n2>| >= c_nr |n|^eps |n2|^eps (c_nr = 1) and
nearly resonant otherwise.  Non-resonant triples split by which of the
three modulation weights <tau_i + |n_i|^2> is largest; resonant triples
split by the relative sizes of |n| and |n2|, and then by the largest dyadic
modulation against the relevant spatial block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .lattice import (
    UNIT_TORUS,
    DyadicTriple,
    InteractionTriple,
    TorusGeometry,
)

# threshold constant in the non-resonance test (the inequality is stated up
# to an unspecified constant; 1 shifts constants, not structure)
C_NONRESONANT = 1.0


@dataclass(frozen=True)
class EstimateParams:
    """Small exponents of the bilinear estimate: 0 < delta2 < delta1 < 2*delta2."""

    eps: float = 0.1
    delta1: float = 0.08
    delta2: float = 0.05
    s: float = 0.0

    def __post_init__(self):
        if not (0 < self.eps < 1 / 3):
            raise ValueError("eps must lie in (0, 1/3)")
        if not (0 < self.delta2 < self.delta1 < 2 * self.delta2):
            raise ValueError("need 0 < delta2 < delta1 < 2*delta2")
        if self.s < 0:
            raise ValueError("s must be nonnegative")

    @property
    def b_plus(self) -> float:
        return 0.5 + self.delta2

    @property
    def b_minus(self) -> float:
        return -0.5 + self.delta1


class CaseTag(Enum):
    ZERO_MODE = "ZeroMode"
    NR_CASE1 = "NR-Case1"
    NR_CASE2 = "NR-Case2"
    NR_CASE3 = "NR-Case3"
    R_1A = "R-1a"
    R_1B = "R-1b"
    R_1C = "R-1c"
    R_2A = "R-2a"
    R_2B = "R-2b"
    R_3_HIGH = "R-3-high"
    R_3_LOW = "R-3-low"


_TAG_ORDER = list(CaseTag)
_TAG_CODE = {tag: i for i, tag in enumerate(_TAG_ORDER)}


def classify_batch(
    n1x, n1y, n2x, n2y, tau1, tau2,
    L0, L1, L2, N0, N2,
    eps: float = 0.1,
    geom: TorusGeometry = UNIT_TORUS,
) -> np.ndarray:
    """Vectorized classifier; returns int8 codes indexing list(CaseTag).

    Inputs describe legs 1 and 2 (difference convention, so n = n1 - n2 and
    tau = tau1 - tau2) together with the dyadic blocks of all three legs.
    """
    n1x = np.asarray(n1x)
    n1y = np.asarray(n1y)
    n2x = np.asarray(n2x)
    n2y = np.asarray(n2y)
    nx = n1x - n2x
    ny = n1y - n2y
    tau = np.asarray(tau1, dtype=float) - np.asarray(tau2, dtype=float)

    Q = geom.norm_sq(nx, ny)            # |n|^2
    R = geom.norm_sq(n2x, n2y)          # |n2|^2
    Q1 = geom.norm_sq(n1x, n1y)
    d = np.abs(geom.dot(nx, ny, n2x, n2y))

    lam0 = np.abs(tau + Q)
    lam1 = np.abs(np.asarray(tau1, dtype=float) + Q1)
    lam2 = np.abs(np.asarray(tau2, dtype=float) + R)

    out = np.empty(np.broadcast(nx, tau).shape, dtype=np.int8)
    out[:] = _TAG_CODE[CaseTag.ZERO_MODE]
    zero = (Q == 0) | (Q1 == 0) | (R == 0)

    nonres = d >= C_NONRESONANT * (Q * R) ** (eps / 2.0)
    # ties go to the lowest leg index
    argmax = np.where(
        lam0 >= np.maximum(lam1, lam2), 0, np.where(lam1 >= lam2, 1, 2)
    )
    nr_codes = np.choose(
        argmax,
        [
            _TAG_CODE[CaseTag.NR_CASE1],
            _TAG_CODE[CaseTag.NR_CASE2],
            _TAG_CODE[CaseTag.NR_CASE3],
        ],
    )

    case1 = (Q <= R * R) & (R <= Q * Q)          # |n|^(1/2) <= |n2| <= |n|^2
    sub1a = (4.0 * R >= Q) & (R <= 4.0 * Q)       # 1/2 <= |n2|/|n| <= 2
    sub1b = 4.0 * R < Q
    case2 = R > Q * Q                             # |n|^2 < |n2|
    Lmax = np.maximum(np.asarray(L0), np.maximum(np.asarray(L1), np.asarray(L2)))
    c1 = np.where(
        sub1a, _TAG_CODE[CaseTag.R_1A],
        np.where(sub1b, _TAG_CODE[CaseTag.R_1B], _TAG_CODE[CaseTag.R_1C]),
    )
    c2 = np.where(Lmax >= np.asarray(N2), _TAG_CODE[CaseTag.R_2A],
                  _TAG_CODE[CaseTag.R_2B])
    c3 = np.where(Lmax >= np.asarray(N0), _TAG_CODE[CaseTag.R_3_HIGH],
                  _TAG_CODE[CaseTag.R_3_LOW])
    res_codes = np.where(case1, c1, np.where(case2, c2, c3))

    out = np.where(zero, _TAG_CODE[CaseTag.ZERO_MODE],
                   np.where(nonres, nr_codes, res_codes)).astype(np.int8)
    return out


def classify_interaction(t: InteractionTriple, p: EstimateParams,
                         blocks: DyadicTriple,
                         geom: TorusGeometry = UNIT_TORUS) -> CaseTag:
    """Assign the unique case tag of an admissible triple."""
    if t.convention != "difference":
        raise ValueError("classification is defined for the difference convention")
    code = classify_batch(
        np.array([t.n1.n1]), np.array([t.n1.n2]),
        np.array([t.n2.n1]), np.array([t.n2.n2]),
        np.array([t.tau1]), np.array([t.tau2]),
        blocks.L0, blocks.L1, blocks.L2, blocks.N0, blocks.N2,
        eps=p.eps, geom=geom,
    )
    return _TAG_ORDER[int(code[0])]


def tag_of_code(code: int) -> CaseTag:
    return _TAG_ORDER[int(code)]


def near_orthogonality_check(n, n2, theta: float,
                             geom: TorusGeometry = UNIT_TORUS) -> bool:
    """Theorem check: |cos angle(n, n2)| < theta forces the unsigned angle
    into [pi/2 - arcsin theta, pi/2 + arcsin theta].  Always true; a False
    return is a bug (modulo a 1e-12 floating-point guard)."""
    if not (0 < theta < 0.5):
        raise ValueError("theta must lie in (0, 1/2)")
    qn = geom.norm_sq(n.n1, n.n2)
    qm = geom.norm_sq(n2.n1, n2.n2)
    if qn == 0 or qm == 0:
        raise ValueError("angles require nonzero frequencies")
    cosang = geom.dot(n.n1, n.n2, n2.n1, n2.n2) / math.sqrt(qn * qm)
    if abs(cosang) >= theta:
        return True  # hypothesis fails; implication vacuous
    ang = math.acos(max(-1.0, min(1.0, cosang)))
    half = math.asin(theta)
    return (math.pi / 2 - half - 1e-12) <= ang <= (math.pi / 2 + half + 1e-12)
