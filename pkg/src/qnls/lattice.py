"""Integer frequency lattice Z^2: dyadic blocks, modulation blocks, angular
sectors, interaction triples, and the brute-force rotated-sector counting
oracle.

Conventions used throughout the package:

  * the torus may be anisotropic with period ratios (alpha1, alpha2); the
    dispersion symbol of a frequency n = (n1, n2) is
    |n|_a^2 = (n1/alpha1)^2 + (n2/alpha2)^2,
    which reduces to the plain |n|^2 on the square torus;
  * dyadic spatial block N >= 1 holds N/2 < |n|_a <= N, with the zero mode
    assigned to block 1 (so block 1 is {|n|_a <= 1} and the blocks
    partition all of Z^2);
  * dyadic modulation block L >= 1 holds L/2 < |tau + |n|_a^2| <= L, with
    values <= 1 assigned to block 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class TorusGeometry:
    """Period ratios of the torus; (1, 1) is the square torus."""

    alpha1: float = 1.0
    alpha2: float = 1.0

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise ValueError("period ratios must be positive")

    def norm_sq(self, n1, n2):
        """Dispersion symbol |n|_a^2; accepts scalars or arrays."""
        return (np.asarray(n1) / self.alpha1) ** 2 + (np.asarray(n2) / self.alpha2) ** 2

    def dot(self, m1, m2, n1, n2):
        """Inner product associated with the dispersion symbol."""
        return (np.asarray(m1) * np.asarray(n1)) / self.alpha1**2 + (
            np.asarray(m2) * np.asarray(n2)
        ) / self.alpha2**2


UNIT_TORUS = TorusGeometry()


@dataclass(frozen=True)
class FreqVec:
    """A point of the frequency lattice Z^2."""

    n1: int
    n2: int

    def norm_sq(self, geom: TorusGeometry = UNIT_TORUS) -> float:
        return float(geom.norm_sq(self.n1, self.n2))

    def norm(self, geom: TorusGeometry = UNIT_TORUS) -> float:
        return math.sqrt(self.norm_sq(geom))

    def dot(self, other: "FreqVec", geom: TorusGeometry = UNIT_TORUS) -> float:
        return float(geom.dot(self.n1, self.n2, other.n1, other.n2))

    def arg(self) -> float:
        """Angle in [0, 2*pi); undefined for the zero vector."""
        if self.n1 == 0 and self.n2 == 0:
            raise ValueError("argument of the zero frequency is undefined")
        a = math.atan2(self.n2, self.n1)
        return a + 2.0 * math.pi if a < 0 else a

    def __add__(self, other: "FreqVec") -> "FreqVec":
        return FreqVec(self.n1 + other.n1, self.n2 + other.n2)

    def __sub__(self, other: "FreqVec") -> "FreqVec":
        return FreqVec(self.n1 - other.n1, self.n2 - other.n2)

    @property
    def is_zero(self) -> bool:
        return self.n1 == 0 and self.n2 == 0


def _is_dyadic(x) -> bool:
    return isinstance(x, (int, np.integer)) and x >= 1 and (x & (x - 1)) == 0


def dyadic_block_of(n: FreqVec, geom: TorusGeometry = UNIT_TORUS) -> int:
    """The dyadic N >= 1 with N/2 < |n|_a <= N (N = 1 also holds |n|_a <= 1)."""
    return int(dyadic_block_of_sq(n.norm_sq(geom)))


def dyadic_block_of_sq(norm_sq):
    """Vectorized dyadic block from squared norms."""
    q = np.asarray(norm_sq, dtype=float)
    n = np.maximum(q, 1.0)
    # exponent guess from log2, then a one-step correction for boundary rounding
    e = np.ceil(np.log2(n) / 2.0)
    block = np.exp2(e)
    block = np.where(q <= (block / 2.0) ** 2, block / 2.0, block)
    block = np.where(q > block**2, block * 2.0, block)
    block = np.maximum(block, 1.0)
    if np.isscalar(norm_sq) or np.asarray(norm_sq).ndim == 0:
        return int(block)
    return block.astype(np.int64)


def modulation_block_of(tau, n: FreqVec, geom: TorusGeometry = UNIT_TORUS) -> int:
    """The dyadic L >= 1 with L/2 < |tau + |n|_a^2| <= L (L = 1 holds <= 1)."""
    return int(modulation_block_of_value(abs(tau + n.norm_sq(geom))))


def modulation_block_of_value(abs_lambda):
    """Vectorized dyadic modulation block from |tau + |n|_a^2|."""
    lam = np.asarray(abs_lambda, dtype=float)
    n = np.maximum(lam, 1.0)
    e = np.ceil(np.log2(n))
    block = np.exp2(e)
    block = np.where(lam <= block / 2.0, block / 2.0, block)
    block = np.where(lam > block, block * 2.0, block)
    block = np.maximum(block, 1.0)
    if np.isscalar(abs_lambda) or np.asarray(abs_lambda).ndim == 0:
        return int(block)
    return block.astype(np.int64)


def spatial_block_contains(N: int, norm_sq) -> np.ndarray:
    """Membership mask of the dyadic spatial block N (block 1 includes 0)."""
    q = np.asarray(norm_sq, dtype=float)
    if N == 1:
        return q <= 1.0
    return ((N / 2.0) ** 2 < q) & (q <= float(N) ** 2)


def modulation_block_contains(L: int, lam) -> np.ndarray:
    """Membership mask of the modulation block L on lambda = tau + |n|_a^2."""
    a = np.abs(np.asarray(lam, dtype=float))
    if L == 1:
        return a <= 1.0
    return (L / 2.0 < a) & (a <= float(L))


@dataclass(frozen=True)
class DyadicTriple:
    """Six dyadic indices (N0, N1, N2, L0, L1, L2) for a trilinear interaction.

    Leg 0 is the output (tau, n), legs 1 and 2 the inputs.
    """

    N0: int
    N1: int
    N2: int
    L0: int
    L1: int
    L2: int

    def __post_init__(self):
        for v in (self.N0, self.N1, self.N2, self.L0, self.L1, self.L2):
            if not _is_dyadic(v):
                raise ValueError(f"{v} is not a dyadic integer >= 1")

    @property
    def Nmax(self) -> int:
        return max(self.N0, self.N1, self.N2)

    @property
    def Nmin(self) -> int:
        return min(self.N0, self.N1, self.N2)

    @property
    def Lmax(self) -> int:
        return max(self.L0, self.L1, self.L2)

    @property
    def Lmin(self) -> int:
        return min(self.L0, self.L1, self.L2)

    @property
    def Lmed(self) -> int:
        return (self.L0 * self.L1 * self.L2) // (self.Lmin * self.Lmax)


@dataclass(frozen=True)
class InteractionTriple:
    """A frequency/modulation triple ((tau, n), (tau1, n1), (tau2, n2)).

    Under the difference convention the convolution constraint is
    n = n1 - n2, tau = tau1 - tau2; under the sum convention it is
    n = n1 + n2, tau = tau1 + tau2.
    """

    tau: float
    tau1: float
    tau2: float
    n: FreqVec
    n1: FreqVec
    n2: FreqVec
    convention: str = "difference"

    _TOL = 1e-9

    def __post_init__(self):
        if self.convention not in ("difference", "sum"):
            raise ValueError("convention must be 'difference' or 'sum'")
        if self.convention == "difference":
            ok = (self.n == self.n1 - self.n2) and abs(
                self.tau - (self.tau1 - self.tau2)
            ) <= self._TOL
        else:
            ok = (self.n == self.n1 + self.n2) and abs(
                self.tau - (self.tau1 + self.tau2)
            ) <= self._TOL
        if not ok:
            raise ValueError("convolution constraint violated")

    @classmethod
    def from_legs(cls, n1: FreqVec, n2: FreqVec, tau1: float, tau2: float,
                  convention: str = "difference") -> "InteractionTriple":
        if convention == "difference":
            return cls(tau1 - tau2, tau1, tau2, n1 - n2, n1, n2, convention)
        return cls(tau1 + tau2, tau1, tau2, n1 + n2, n1, n2, "sum")

    def modulations(self, geom: TorusGeometry = UNIT_TORUS):
        """(lambda0, lambda1, lambda2) = tau_i + |n_i|_a^2 for the three legs."""
        return (
            self.tau + self.n.norm_sq(geom),
            self.tau1 + self.n1.norm_sq(geom),
            self.tau2 + self.n2.norm_sq(geom),
        )


def phase_sum(t: InteractionTriple, geom: TorusGeometry = UNIT_TORUS) -> float:
    """Alternating sum of the three modulations.

    Equals -2<n, n2>_a under the difference convention and +2<n1, n2>_a
    under the sum convention, exactly and for every admissible triple.
    """
    lam0, lam1, lam2 = t.modulations(geom)
    if t.convention == "difference":
        return lam0 - lam1 + lam2
    return lam0 - lam1 - lam2


@dataclass(frozen=True)
class AngularSector:
    """Half-open angular sector ell of a given width, within a dyadic shell N."""

    N: int
    width: float
    ell: int

    def __post_init__(self):
        if not (0 < self.width < 2 * math.pi):
            raise ValueError("width must lie in (0, 2*pi)")
        if not (0 <= self.ell < self.num_sectors):
            raise ValueError("sector index out of range")

    @property
    def num_sectors(self) -> int:
        return int(math.ceil(2 * math.pi / self.width))

    def contains(self, n: FreqVec, geom: TorusGeometry = UNIT_TORUS) -> bool:
        if n.is_zero:
            return False
        if not spatial_block_contains(self.N, n.norm_sq(geom)):
            return False
        return sector_index(n, self.width) == self.ell


def sector_index(n: FreqVec, width: float) -> int:
    """ell = floor(arg(n) / width) with arg in [0, 2*pi)."""
    if n.is_zero:
        raise ValueError("sector index of the zero frequency is undefined")
    if not (0 < width < 2 * math.pi):
        raise ValueError("width must lie in (0, 2*pi)")
    return int(math.floor(n.arg() / width))


def sector_index_batch(n1, n2, width: float) -> np.ndarray:
    a = np.arctan2(np.asarray(n2), np.asarray(n1))
    a = np.where(a < 0, a + 2 * np.pi, a)
    return np.floor(a / width).astype(np.int64)


# -- counting oracle ---------------------------------------------------------

# "much smaller than" is operationalized as <= 1/8 of the right-hand side
LL_FACTOR = 0.125


@dataclass(frozen=True)
class CountingInstance:
    """Parameters of the rotated annulus-strip-sector counting problem.

    Counts integer points in R(D n K) where, before the rotation R,
    D = {N <= |xi| <= N + mu, M <= xi_1 <= M + nu} and K is the set of xi
    whose unsigned angle with e1 lies in [alpha/2, 2*alpha].
    """

    N: float
    mu: float
    nu: float
    M: float = 0.0
    alpha_angle: float = math.pi / 4
    rotation: float = 0.0

    def __post_init__(self):
        if self.N <= 0 or self.mu < 0 or self.nu < 0 or self.M < 0:
            raise ValueError("N must be positive; mu, nu, M nonnegative")
        if not (0 < self.alpha_angle <= math.pi / 4):
            raise ValueError("alpha_angle must lie in (0, pi/4]")

    def hypothesis_ok(self) -> bool:
        """Whether the lemma hypotheses hold, with '<<' read as <= 1/8 of."""
        if not (1.0 <= LL_FACTOR * self.N):
            return False
        lo = 1.0 / self.N
        hi = LL_FACTOR * self.N
        if not (lo <= self.mu <= hi and lo <= self.nu <= hi):
            return False
        gate = math.sqrt((self.mu + min(self.nu, 1.0)) / self.N)
        return gate <= LL_FACTOR * self.alpha_angle


def counting_bound(inst: CountingInstance) -> float:
    """max(nu, 1) * (alpha^{-1} (mu + min(nu, 1)) + 1)."""
    return max(inst.nu, 1.0) * (
        (inst.mu + min(inst.nu, 1.0)) / inst.alpha_angle + 1.0
    )


@lru_cache(maxsize=128)
def _annulus_points(n_sq_lo: float, n_sq_hi: float, radius_cap: int):
    """Integer points p with n_sq_lo <= |p|^2 <= n_sq_hi, |p|^2 exact."""
    r = radius_cap
    ax = np.arange(-r, r + 1, dtype=np.int64)
    px, py = np.meshgrid(ax, ax, indexing="ij")
    rr = px * px + py * py
    keep = (rr >= n_sq_lo) & (rr <= n_sq_hi)
    return px[keep], py[keep], rr[keep]


def counting_count(inst: CountingInstance) -> int:
    """Exact |Z^2 n R(D n K)| by enumeration.

    The annulus test uses exact integer |p|^2 (rotation invariant); the strip
    and sector tests apply the back-rotation in floating point.
    """
    hi = inst.N + inst.mu
    px, py, rr = _annulus_points(inst.N**2, hi**2, int(math.ceil(hi)) + 1)
    if px.size == 0:
        return 0
    c, s = math.cos(inst.rotation), math.sin(inst.rotation)
    # back-rotate: q = R^{-1} p
    q1 = c * px + s * py
    q2 = -s * px + c * py
    keep = (q1 >= inst.M) & (q1 <= inst.M + inst.nu)
    if not keep.any():
        return 0
    # unsigned angle with e1 restricted to [alpha/2, 2 alpha]
    norm = np.sqrt(rr[keep].astype(float))
    ang = np.arccos(np.clip(q1[keep] / norm, -1.0, 1.0))
    ok = (ang >= inst.alpha_angle / 2) & (ang <= 2 * inst.alpha_angle)
    return int(np.count_nonzero(ok))


def shell_points(N: int, geom: TorusGeometry = UNIT_TORUS):
    """All lattice points of the dyadic spatial block N (block 1 includes 0)."""
    cap = int(math.ceil(N * max(geom.alpha1, geom.alpha2))) + 1
    ax = np.arange(-cap, cap + 1, dtype=np.int64)
    px, py = np.meshgrid(ax, ax, indexing="ij")
    q = geom.norm_sq(px, py)
    keep = spatial_block_contains(N, q)
    return px[keep], py[keep]
