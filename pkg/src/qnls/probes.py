"""Core estimate probes: bilinear Strichartz, the bilinear X^{s,b} estimate,
trilinear forms, the high/low modulation bounds, and resonant fiber counts.

Each probe returns the ratio of an exactly-evaluated left-hand side to the
stated right-hand side; sweep drivers in sweeps.py aggregate ratios into
reports.  All bilinear and trilinear interactions are evaluated on the
integer frequency lattice (see blockfield), so the only floating-point
error is roundoff.

The "much smaller than" angular cutoffs are implemented with constant 1
(|cos| < theta), matching the unit constant used in the non-resonance
threshold; hypothesis gates on dyadic blocks use a factor of 8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blockfield import (
    BlockField,
    LatticeField,
    SupportError,
    from_spacetime,
    int01_exp,
    l2_norm,
    lattice_convolve,
    match_terms,
    validate_block_support,
)
from .classify import EstimateParams, classify_batch, tag_of_code
from .fields import SpacetimeField, SpatialField
from .lattice import (
    UNIT_TORUS,
    DyadicTriple,
    FreqVec,
    TorusGeometry,
    spatial_block_contains,
)
from .norms import SMOOTH_BUMP, bracket, cutoff_kernel

PROBE_KERNEL_TOL = 1e-8


def _as_lattice(u) -> LatticeField:
    if isinstance(u, SpacetimeField):
        return from_spacetime(u)
    return u


# -- bilinear Strichartz ------------------------------------------------------


def bilinear_strichartz_rhs(N0: int, blocks: DyadicTriple) -> float:
    """min(L1,L2)^(1/2) (max(L1,L2)/N0 + 1)^(1/2) min(N0,N1,N2)^(1/2)."""
    l_lo = min(blocks.L1, blocks.L2)
    l_hi = max(blocks.L1, blocks.L2)
    nmin = min(N0, blocks.N1, blocks.N2)
    return math.sqrt(l_lo) * math.sqrt(l_hi / N0 + 1.0) * math.sqrt(nmin)


def bilinear_strichartz_shell_ratios(u1, u2, blocks: DyadicTriple,
                                     geom: TorusGeometry = UNIT_TORUS) -> dict:
    """Ratio of ||F(u1 conj(u2))|| on each output shell N0 to the block bound.

    Returns {N0: ratio} over every dyadic shell met by the product support.
    """
    f1, f2 = _as_lattice(u1), _as_lattice(u2)
    validate_block_support(f1, blocks.N1, blocks.L1, geom)
    validate_block_support(f2, blocks.N2, blocks.L2, geom)
    den0 = l2_norm(f1) * l2_norm(f2)
    if den0 == 0:
        return {}
    w = lattice_convolve(f1, f2, "uvbar")
    if w.size == 0:
        return {}
    from .lattice import dyadic_block_of_sq

    shells = dyadic_block_of_sq(w.norm_sq_spatial(geom))
    shells = np.atleast_1d(shells)
    energy = w.dtau * np.abs(w.w) ** 2
    out = {}
    for N0 in np.unique(shells):
        num = math.sqrt(float(energy[shells == N0].sum()))
        out[int(N0)] = num / (bilinear_strichartz_rhs(int(N0), blocks) * den0)
    return out


def bilinear_strichartz_ratio(u1, u2, N0: int, blocks: DyadicTriple,
                              geom: TorusGeometry = UNIT_TORUS) -> float:
    """Single-shell version; 0 when the product misses the shell."""
    f1, f2 = _as_lattice(u1), _as_lattice(u2)
    validate_block_support(f1, blocks.N1, blocks.L1, geom)
    validate_block_support(f2, blocks.N2, blocks.L2, geom)
    den0 = l2_norm(f1) * l2_norm(f2)
    if den0 == 0:
        return 0.0
    w = lattice_convolve(f1, f2, "uvbar")
    if w.size == 0:
        return 0.0
    mask = spatial_block_contains(N0, w.norm_sq_spatial(geom))
    num = math.sqrt(float((w.dtau * np.abs(w.w[mask]) ** 2).sum()))
    return num / (bilinear_strichartz_rhs(N0, blocks) * den0)


# -- trilinear form ------------------------------------------------------------

_PAIR_CHUNK = 4_000_000


def _oriented_modes(phi: SpatialField, conjugated: bool):
    """Mode array and sign entering the product of starred free evolutions.

    A conjugated factor contributes conj(phihat(-m)) at mode m with phase
    +|m|^2 t; an unconjugated one phihat(m) with phase -|m|^2 t.
    """
    c = phi.modes
    if not conjugated:
        return c, -1.0
    if np.any(c[0, :]) or np.any(c[:, 0]):
        raise ValueError(
            "conjugated factors need modes inside the symmetric band |n_i| < M/2"
        )
    flipped = np.zeros_like(c)
    flipped[1:, 1:] = c[:0:-1, :0:-1]
    return np.conj(flipped), 1.0


def trilinear_form(phi1: SpatialField, phi2: SpatialField, phi3: SpatialField,
                   conj=(False, True, True)) -> complex:
    """Integral over [0,1] x torus of the product of starred free evolutions,
    evaluated exactly: mode-pair summation with the closed-form time
    integral of each oscillation exp(i Omega t)."""
    grid = phi1.grid
    if phi2.grid != grid or phi3.grid != grid:
        raise ValueError("fields must share a grid")
    a1, s1 = _oriented_modes(phi1, conj[0])
    a2, s2 = _oriented_modes(phi2, conj[1])
    a3, s3 = _oriented_modes(phi3, conj[2])
    q = grid.mode_norm_sq()
    i1x, i1y = np.nonzero(a1)
    i2x, i2y = np.nonzero(a2)
    if i1x.size == 0 or i2x.size == 0:
        return 0.0 + 0.0j
    total = 0.0 + 0.0j
    half_x, half_y = grid.Mx // 2, grid.My // 2
    chunk = max(1, _PAIR_CHUNK // max(1, i2x.size))
    for lo in range(0, i1x.size, chunk):
        hi = min(lo + chunk, i1x.size)
        c1 = a1[i1x[lo:hi], i1y[lo:hi]][:, None]
        q1 = q[i1x[lo:hi], i1y[lo:hi]][:, None]
        # m3 = -m1 - m2 in centered indices
        jx = 3 * half_x - (i1x[lo:hi, None] + i2x[None, :])
        jy = 3 * half_y - (i1y[lo:hi, None] + i2y[None, :])
        ok = (jx >= 0) & (jx < grid.Mx) & (jy >= 0) & (jy < grid.My)
        jxc = np.where(ok, jx, 0)
        jyc = np.where(ok, jy, 0)
        c3 = np.where(ok, a3[jxc, jyc], 0.0)
        q3 = q[jxc, jyc]
        c2 = a2[i2x, i2y][None, :]
        q2 = q[i2x, i2y][None, :]
        omega = s1 * q1 + s2 * q2 + s3 * q3
        total += (c1 * c2 * c3 * int01_exp(omega)).sum()
    return complex(total)


def trilinear_form_quadrature(phi1, phi2, phi3, conj=(False, True, True),
                              nt: int = 4096) -> complex:
    """Independent evaluation: zero-mode of the pointwise product on the
    physical grid, trapezoid-integrated over nt time slices of [0, 1]."""
    from .fields import free_propagate

    grid = phi1.grid
    ts = np.linspace(0.0, 1.0, nt + 1)
    vals = np.empty(nt + 1, dtype=complex)
    for i, t in enumerate(ts):
        prod = np.ones((grid.Mx, grid.My), dtype=complex)
        for phi, cj in zip((phi1, phi2, phi3), conj):
            v = free_propagate(phi, float(t)).values()
            prod = prod * (np.conj(v) if cj else v)
        vals[i] = prod.mean()
    return complex(np.trapezoid(vals, dx=1.0 / nt))


# -- bilinear X^{s,b} ----------------------------------------------------------


def bilinear_xsb_ratio(u, v, p: EstimateParams, pattern: str = "uvbar",
                       T: float = 1.0, cutoff_shape: str = SMOOTH_BUMP,
                       geom: TorusGeometry = UNIT_TORUS,
                       kernel_tol: float = PROBE_KERNEL_TOL) -> float:
    """Restriction-norm ratio of the paired product estimate:

        ||u v*||_(s, -1/2+delta1)  /  (||u||_(s, 1/2+delta2) ||v||_(s, 1/2+delta2))

    with all three norms the fixed-cutoff extension upper bounds on [-T, T].
    """
    from .blockfield import smeared_xsb_norm

    f, g = _as_lattice(u), _as_lattice(v)
    twin = 2.0 * math.pi / f.dtau
    offs, taps = cutoff_kernel(cutoff_shape, T, twin, tol=kernel_tol)
    den_u = smeared_xsb_norm(f, offs, taps, p.s, p.b_plus, geom)
    den_v = smeared_xsb_norm(g, offs, taps, p.s, p.b_plus, geom)
    if den_u == 0 or den_v == 0:
        raise ValueError("zero factor norm: ratio rejected")
    w = lattice_convolve(f, g, pattern)
    num = smeared_xsb_norm(w, offs, taps, p.s, p.b_minus, geom)
    return num / (den_u * den_v)


def dual_trilinear_form(u, v, w, p: EstimateParams,
                        geom: TorusGeometry = UNIT_TORUS):
    """Weighted trilinear convolution sum of the dual formulation, exactly.

    Returns (value, tags, contributions): value is the full complex sum of

        uhat(tau1,n1) conj(vhat(tau2,n2)) conj(what(tau,n))
        / ( <lam1>^(1/2+d2) <lam2>^(1/2+d2) <lam0>^(1/2-d1) )   * dtau^2

    over n = n1 - n2, tau = tau1 - tau2; tags/contributions give the exact
    per-case decomposition of the same sum.
    """
    fu, fv, fw = _as_lattice(u), _as_lattice(v), _as_lattice(w)
    i, j, k = match_terms(fu, fv, fw)
    if len(i) == 0:
        return 0.0 + 0.0j, np.zeros(0, dtype=np.int8), np.zeros(0, dtype=complex)
    lam1 = fu.modulations(geom)[i]
    lam2 = fv.modulations(geom)[j]
    lam0 = fw.modulations(geom)[k]
    weight = (
        bracket(lam1) ** (0.5 + p.delta2)
        * bracket(lam2) ** (0.5 + p.delta2)
        * bracket(lam0) ** (0.5 - p.delta1)
    )
    terms = (
        fu.w[i] * np.conj(fv.w[j]) * np.conj(fw.w[k]) / weight * fu.dtau**2
    )
    from .lattice import dyadic_block_of_sq, modulation_block_of_value

    q0 = fw.norm_sq_spatial(geom)[k]
    q2 = fv.norm_sq_spatial(geom)[j]
    N0 = np.maximum(dyadic_block_of_sq(q0), 1)
    N2 = np.maximum(dyadic_block_of_sq(q2), 1)
    L0 = modulation_block_of_value(np.abs(lam0))
    L1 = modulation_block_of_value(np.abs(lam1))
    L2 = modulation_block_of_value(np.abs(lam2))
    tags = classify_batch(
        fu.n1[i], fu.n2[i], fv.n1[j], fv.n2[j],
        fu.tau()[i], fv.tau()[j],
        L0, L1, L2, N0, N2, eps=p.eps, geom=geom,
    )
    return complex(terms.sum()), tags, terms


# -- modulation lemmas ---------------------------------------------------------

HYPOTHESIS_FACTOR = 8.0


def _trilinear_value(f: LatticeField, g: LatticeField, h: LatticeField,
                     mask_fn=None, geom: TorusGeometry = UNIT_TORUS) -> float:
    i, j, k = match_terms(f, g, h)
    if len(i) == 0:
        return 0.0
    terms = (f.w[i] * g.w[j] * h.w[k]).astype(float) * f.dtau**2
    if mask_fn is not None:
        terms = terms * mask_fn(i, j, k)
    return float(terms.sum())


def high_modulation_ratio(f: BlockField, g: BlockField, h: BlockField,
                          blocks: DyadicTriple, kappa: float = 0.01,
                          geom: TorusGeometry = UNIT_TORUS) -> float:
    """Unweighted trilinear sum over the nonnegative block data, divided by

        L1^(1/2+kappa) L2^(1/2+kappa) L0^(1/4+kappa) N2^(-kappa) prod ||.||

    Requires N0^2 << N2 ~ N1 and Lmax >= N2 (high modulation regime).
    """
    if not blocks.N0**2 * HYPOTHESIS_FACTOR <= blocks.N2:
        raise ValueError("need N0^2 << N2")
    if not (blocks.N2 // 2 <= blocks.N1 <= 2 * blocks.N2):
        raise ValueError("need N1 ~ N2")
    if blocks.Lmax < blocks.N2:
        raise ValueError("need Lmax >= N2 (high modulation)")
    for bf, N, L in ((f, blocks.N1, blocks.L1), (g, blocks.N2, blocks.L2),
                     (h, blocks.N0, blocks.L0)):
        if (bf.N, bf.L) != (N, L):
            raise SupportError("block declarations do not match the dyadic triple")
    norms = l2_norm(f.field) * l2_norm(g.field) * l2_norm(h.field)
    if norms == 0:
        return 0.0
    value = _trilinear_value(f.field, g.field, h.field, geom=geom)
    rhs = (
        blocks.L1 ** (0.5 + kappa)
        * blocks.L2 ** (0.5 + kappa)
        * blocks.L0 ** (0.25 + kappa)
        * blocks.N2 ** (-kappa)
    )
    return value / (rhs * norms)


def low_modulation_ratio(f: BlockField, g: BlockField, h: LatticeField,
                         blocks: DyadicTriple, theta=None, eps: float = 0.1,
                         geom: TorusGeometry = UNIT_TORUS) -> float:
    """Angularly-restricted trilinear sum over nonnegative data, divided by
    Lmed^(3/8) Lmax^(3/8) prod ||.||.

    The summand carries the near-orthogonality cutoff |cos angle(n, n2)| <
    theta; with theta None the per-pair value 1/(|n|^(1-eps) |n2|^(1-eps))
    is used.  h must live on {1 <= |n|^2 << N2} within its modulation block.
    """
    if not (blocks.N2 // 2 <= blocks.N1 <= 2 * blocks.N2):
        raise ValueError("need N1 ~ N2")
    if not blocks.Lmax * HYPOTHESIS_FACTOR < blocks.N2:
        raise ValueError("need Lmax << N2 (low modulation)")
    if (np.asarray(h.w) < 0).any() or np.iscomplexobj(h.w):
        raise ValueError("h must carry nonnegative real values")
    qh = h.norm_sq_spatial(geom)
    if not ((qh >= 1.0) & (qh * HYPOTHESIS_FACTOR <= blocks.N2)).all():
        raise SupportError("h support must satisfy 1 <= |n|^2 << N2")
    from .lattice import modulation_block_contains

    if not modulation_block_contains(blocks.L0, h.modulations(geom)).all():
        raise SupportError(f"h modulation support escapes block L0={blocks.L0}")
    norms = l2_norm(f.field) * l2_norm(g.field) * l2_norm(h)
    if norms == 0:
        return 0.0

    qg = g.field.norm_sq_spatial(geom)

    def angular_mask(i, j, k):
        dot = geom.dot(h.n1[k], h.n2[k], g.field.n1[j], g.field.n2[j])
        qq = qh[k] * qg[j]
        cut = theta if theta is not None else (qq ** ((1.0 - eps) / 2.0)) ** -1.0
        # |cos| < theta  <=>  dot^2 < theta^2 |n|^2 |n2|^2
        return (dot * dot < cut * cut * qq).astype(float)

    value = _trilinear_value(f.field, g.field, h, mask_fn=angular_mask, geom=geom)
    rhs = blocks.Lmed ** 0.375 * blocks.Lmax ** 0.375
    return value / (rhs * norms)


# -- resonant fibers ------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    center: FreqVec
    radius: float


@dataclass(frozen=True)
class ResonantFiberSpec:
    """Parameters of one fiber set: fixed output point (tau, n), fixed tau1,
    radial shells j1/j2, covering balls J1/J2, dyadic blocks, and the
    angular cutoff."""

    tau: float
    tau1: float
    n: FreqVec
    j1: int
    j2: int
    J1: Ball
    J2: Ball
    blocks: DyadicTriple
    theta: float

    def in_adjacency_regime(self) -> bool:
        return abs(self.j1 - self.j2) <= 1


def resonant_fiber_size(spec: ResonantFiberSpec,
                        geom: TorusGeometry = UNIT_TORUS) -> int:
    """Exact cardinality of the fiber by enumeration of the covering ball."""
    c1, r1 = spec.J1.center, spec.J1.radius
    cap = int(math.ceil(r1)) + 1
    ax1 = np.arange(c1.n1 - cap, c1.n1 + cap + 1)
    ax2 = np.arange(c1.n2 - cap, c1.n2 + cap + 1)
    m1, m2 = np.meshgrid(ax1, ax2, indexing="ij")
    m1, m2 = m1.ravel(), m2.ravel()
    b = spec.blocks
    keep = (m1 - c1.n1) ** 2 + (m2 - c1.n2) ** 2 <= r1**2
    q1 = geom.norm_sq(m1, m2)
    keep &= spatial_block_contains(b.N1, q1)
    r = np.sqrt(q1)
    keep &= (r > spec.j1) & (r <= spec.j1 + 1)
    from .lattice import modulation_block_contains

    keep &= modulation_block_contains(b.L1, spec.tau1 + q1)
    # second leg n2 = n1 - n
    w1 = m1 - spec.n.n1
    w2 = m2 - spec.n.n2
    q2 = geom.norm_sq(w1, w2)
    keep &= spatial_block_contains(b.N2, q2)
    r2 = np.sqrt(q2)
    keep &= (r2 > spec.j2) & (r2 <= spec.j2 + 1)
    keep &= (w1 - spec.J2.center.n1) ** 2 + (w2 - spec.J2.center.n2) ** 2 <= spec.J2.radius**2
    keep &= modulation_block_contains(b.L2, (spec.tau1 - spec.tau) + q2)
    # angular cutoff |cos angle(n, n2)| < theta
    qn = geom.norm_sq(spec.n.n1, spec.n.n2)
    dot = geom.dot(spec.n.n1, spec.n.n2, w1, w2)
    keep &= dot * dot < spec.theta**2 * qn * q2
    return int(np.count_nonzero(keep))


def resonant_fiber_bound(spec: ResonantFiberSpec) -> float:
    """min(N0, Lmax / N0)."""
    b = spec.blocks
    return float(min(b.N0, b.Lmax / b.N0))
