"""Sparse fields on the discrete spacetime frequency lattice.

The estimate probes evaluate bilinear and trilinear interactions exactly on
the integer lattice (tau index, n1, n2): products are exact convolution
sums over support points, so there is no time grid and no temporal
aliasing.  A LatticeField stores tau as an integer multiple of dtau and
carries the same normalization as the dense grid transforms, so norms and
products computed here agree with the FFT path wherever both apply.

BlockField wraps a nonnegative real LatticeField together with its declared
(N, L) dyadic block, the shape of data entering the modulation lemmas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fields import FOURIER, SpaceGrid, SpacetimeField, TimeWindow, to_fourier
from .lattice import (
    UNIT_TORUS,
    TorusGeometry,
    modulation_block_contains,
    shell_points,
    spatial_block_contains,
)
from .norms import bracket


class SupportError(ValueError):
    """A field's support violates a declared block constraint."""


_N_HALF = 1 << 11        # |n_i| < 2048
_TAU_HALF = 1 << 21      # |tau index| < 2^21
_N_SPAN = 1 << 12
_TAU_SPAN = 1 << 22


def pack_keys(tau_idx, n1, n2) -> np.ndarray:
    t = np.asarray(tau_idx, dtype=np.int64)
    a = np.asarray(n1, dtype=np.int64)
    b = np.asarray(n2, dtype=np.int64)
    if t.size and (
        t.min() <= -_TAU_HALF or t.max() >= _TAU_HALF
        or a.min() <= -_N_HALF or a.max() >= _N_HALF
        or b.min() <= -_N_HALF or b.max() >= _N_HALF
    ):
        raise ValueError("lattice point outside packable range")
    return ((t + _TAU_HALF) << 24) | ((a + _N_HALF) << 12) | (b + _N_HALF)


def unpack_keys(keys: np.ndarray):
    b = (keys & (_N_SPAN - 1)) - _N_HALF
    a = ((keys >> 12) & (_N_SPAN - 1)) - _N_HALF
    t = (keys >> 24) - _TAU_HALF
    return t, a, b


@dataclass
class LatticeField:
    """Coefficients uhat(tau, n) on lattice points tau = tau_idx * dtau."""

    tau_idx: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    w: np.ndarray
    dtau: float = 1.0

    def __post_init__(self):
        sizes = {len(self.tau_idx), len(self.n1), len(self.n2), len(self.w)}
        if len(sizes) != 1:
            raise ValueError("coordinate and weight arrays must share a length")

    @property
    def size(self) -> int:
        return len(self.w)

    def keys(self) -> np.ndarray:
        return pack_keys(self.tau_idx, self.n1, self.n2)

    def tau(self) -> np.ndarray:
        return self.tau_idx * self.dtau

    def modulations(self, geom: TorusGeometry = UNIT_TORUS) -> np.ndarray:
        return self.tau() + geom.norm_sq(self.n1, self.n2)

    def norm_sq_spatial(self, geom: TorusGeometry = UNIT_TORUS) -> np.ndarray:
        return geom.norm_sq(self.n1, self.n2)


def empty_field(dtau: float = 1.0, real: bool = False) -> LatticeField:
    z = np.zeros(0, dtype=np.int64)
    return LatticeField(z, z.copy(), z.copy(),
                        np.zeros(0, dtype=float if real else complex), dtau)


def canonicalize(f: LatticeField) -> LatticeField:
    """Merge duplicate lattice points and drop exact zeros."""
    if f.size == 0:
        return f
    keys = f.keys()
    uniq, inv = np.unique(keys, return_inverse=True)
    if np.iscomplexobj(f.w):
        w = np.bincount(inv, weights=f.w.real, minlength=len(uniq)) + 1j * np.bincount(
            inv, weights=f.w.imag, minlength=len(uniq)
        )
    else:
        w = np.bincount(inv, weights=f.w, minlength=len(uniq))
    keep = w != 0
    t, a, b = unpack_keys(uniq[keep])
    return LatticeField(t, a, b, w[keep], f.dtau)


def l2_norm(f: LatticeField) -> float:
    return float(math.sqrt(f.dtau) * np.linalg.norm(f.w))


def xsb_lattice_norm(f: LatticeField, s: float, b: float,
                     geom: TorusGeometry = UNIT_TORUS) -> float:
    w = bracket(np.sqrt(f.norm_sq_spatial(geom))) ** s * bracket(f.modulations(geom)) ** b
    return float(math.sqrt(f.dtau) * np.linalg.norm(w * f.w))


_PAIR_CAP = 60_000_000


def lattice_convolve(u: LatticeField, v: LatticeField, pattern: str = "uvbar"
                     ) -> LatticeField:
    """Exact spacetime transform of the pointwise product.

    pattern 'uvbar' -> u * conj(v) (difference convention),
    pattern 'uv'    -> u * v      (sum convention).
    """
    if u.dtau != v.dtau:
        raise ValueError("fields must share dtau")
    if u.size * v.size > _PAIR_CAP:
        raise ValueError("convolution pair count exceeds safety cap")
    if u.size == 0 or v.size == 0:
        return empty_field(u.dtau)
    scale = u.dtau / math.sqrt(2.0 * math.pi)
    iu = np.repeat(np.arange(u.size), v.size)
    iv = np.tile(np.arange(v.size), u.size)
    if pattern == "uvbar":
        t = u.tau_idx[iu] - v.tau_idx[iv]
        a = u.n1[iu] - v.n1[iv]
        b = u.n2[iu] - v.n2[iv]
        w = scale * u.w[iu] * np.conj(v.w[iv])
    elif pattern == "uv":
        t = u.tau_idx[iu] + v.tau_idx[iv]
        a = u.n1[iu] + v.n1[iv]
        b = u.n2[iu] + v.n2[iv]
        w = scale * u.w[iu] * v.w[iv]
    else:
        raise ValueError("pattern must be 'uvbar' or 'uv'")
    return canonicalize(LatticeField(t, a, b, w, u.dtau))


def convolve_cutoff(f: LatticeField, offsets: np.ndarray, taps: np.ndarray
                    ) -> LatticeField:
    """Multiply by a time cutoff: convolve tau-coefficients with its taps."""
    if f.size == 0:
        return f
    m = len(offsets)
    t = (f.tau_idx[:, None] + offsets[None, :]).ravel()
    a = np.repeat(f.n1, m)
    b = np.repeat(f.n2, m)
    w = (f.w[:, None] * taps[None, :]).ravel()
    return canonicalize(LatticeField(t, a, b, w, f.dtau))


def smeared_xsb_norm(f: LatticeField, offsets: np.ndarray, taps: np.ndarray,
                     s: float, b: float, geom: TorusGeometry = UNIT_TORUS) -> float:
    """X^{s,b} norm of the cutoff-smeared field, fused (one sort, no field).

    Equivalent to xsb_lattice_norm(convolve_cutoff(f, offsets, taps), s, b).
    """
    if f.size == 0:
        return 0.0
    m = len(offsets)
    t = (f.tau_idx[:, None] + offsets[None, :]).ravel()
    a = np.repeat(f.n1, m)
    bb = np.repeat(f.n2, m)
    w = (f.w[:, None] * taps[None, :]).ravel()
    keys = pack_keys(t, a, bb)
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    w = w[order]
    starts = np.concatenate(([0], np.flatnonzero(np.diff(keys)) + 1))
    merged = np.add.reduceat(w, starts)
    t0, a0, b0 = unpack_keys(keys[starts])
    q = geom.norm_sq(a0, b0)
    lam = t0 * f.dtau + q
    wt = (1.0 + q) ** (s / 2.0) * (1.0 + lam * lam) ** (b / 2.0)
    return float(math.sqrt(f.dtau) * np.linalg.norm(wt * merged))


def match_terms(f: LatticeField, g: LatticeField, h: LatticeField):
    """Indices (i, j, k) with h holding the point (tau_f - tau_g, n_f - n_g).

    Enumerates the convolution terms of the trilinear pairing
    sum f(tau1, n1) g(tau2, n2) h(tau, n) over n = n1 - n2, tau = tau1 - tau2.
    """
    if f.size == 0 or g.size == 0 or h.size == 0:
        z = np.zeros(0, dtype=np.int64)
        return z, z.copy(), z.copy()
    if f.size * g.size > _PAIR_CAP:
        raise ValueError("trilinear pair count exceeds safety cap")
    i = np.repeat(np.arange(f.size), g.size)
    j = np.tile(np.arange(g.size), f.size)
    keys = pack_keys(
        f.tau_idx[i] - g.tau_idx[j], f.n1[i] - g.n1[j], f.n2[i] - g.n2[j]
    )
    hkeys = h.keys()
    order = np.argsort(hkeys, kind="stable")
    sorted_keys = hkeys[order]
    pos = np.searchsorted(sorted_keys, keys)
    pos_c = np.minimum(pos, len(sorted_keys) - 1)
    hit = sorted_keys[pos_c] == keys
    return i[hit], j[hit], order[pos_c[hit]]


def int01_exp(omega) -> np.ndarray:
    """Exact integral of exp(i omega t) over [0, 1]."""
    om = np.asarray(omega, dtype=float)
    return np.exp(0.5j * om) * np.sinc(om / (2.0 * math.pi))


def exact_l4_sq(u: LatticeField, geom: TorusGeometry = UNIT_TORUS) -> float:
    """Exact integral of |u|^4 over [0, 1] x torus (normalized measure).

    Works through w = u * u and integrates |w|^2 with the closed-form time
    integral, so no quadrature error enters.
    """
    w = lattice_convolve(u, u, "uv")
    if w.size == 0:
        return 0.0
    # plain exponential-basis coefficients of w
    coeff = w.w * (w.dtau / math.sqrt(2.0 * math.pi))
    skey = (w.n1.astype(np.int64) + _N_HALF) * _N_SPAN + (w.n2 + _N_HALF)
    order = np.argsort(skey, kind="stable")
    skey = skey[order]
    coeff = coeff[order]
    taus = w.tau()[order]
    total = 0.0
    start = 0
    bounds = np.flatnonzero(np.diff(skey)) + 1
    for end in list(bounds) + [len(skey)]:
        c = coeff[start:end]
        t = taus[start:end]
        # integral of |sum c_i exp(i tau_i t)|^2 = sum_ij c_i conj(c_j) I(tau_i - tau_j)
        om = np.subtract.outer(t, t)
        total += float(np.real(c @ (int01_exp(om) @ np.conj(c))))
        start = end
    return max(total, 0.0)


# -- block sampling -----------------------------------------------------------


def _tau_ranges_for_block(q: np.ndarray, L: int, dtau: float):
    """Inclusive integer tau-index ranges hitting the modulation block L.

    Returns (lo_a, hi_a, lo_b, hi_b): for L == 1 the single range
    |tau + q| <= 1, otherwise the two ranges L/2 < |tau + q| <= L.
    """
    if L == 1:
        lo = np.ceil((-1.0 - q) / dtau).astype(np.int64)
        hi = np.floor((1.0 - q) / dtau).astype(np.int64)
        empty_lo = np.ones_like(lo)
        return lo, hi, empty_lo, empty_lo - 1
    # positive side: L/2 < tau + q <= L
    lo_p = (np.floor((L / 2.0 - q) / dtau) + 1).astype(np.int64)
    hi_p = np.floor((L - q) / dtau).astype(np.int64)
    # negative side: -L <= tau + q < -L/2
    lo_n = np.ceil((-L - q) / dtau).astype(np.int64)
    hi_n = (np.ceil((-L / 2.0 - q) / dtau) - 1).astype(np.int64)
    return lo_p, hi_p, lo_n, hi_n


@lru_cache(maxsize=256)
def _shell_cache(N: int, a1: float, a2: float):
    xs, ys = shell_points(N, TorusGeometry(a1, a2))
    return xs, ys


def block_point_count(N: int, L: int, dtau: float = 1.0,
                      geom: TorusGeometry = UNIT_TORUS) -> int:
    xs, ys = _shell_cache(N, geom.alpha1, geom.alpha2)
    q = geom.norm_sq(xs, ys)
    lo_p, hi_p, lo_n, hi_n = _tau_ranges_for_block(q, L, dtau)
    return int(np.maximum(hi_p - lo_p + 1, 0).sum() + np.maximum(hi_n - lo_n + 1, 0).sum())


def _draw_weights(rng, count: int, kind: str):
    if kind == "gaussian":
        return (rng.standard_normal(count) + 1j * rng.standard_normal(count)) / math.sqrt(2.0)
    if kind == "halfnormal":
        return np.abs(rng.standard_normal(count))
    if kind == "unit":
        return np.ones(count)
    raise ValueError("weight kind must be gaussian, halfnormal or unit")


def sample_block_field(N: int, L: int, rng, npoints: int, dtau: float = 1.0,
                       geom: TorusGeometry = UNIT_TORUS,
                       weights: str = "gaussian") -> LatticeField:
    """Random field supported on (at most) npoints lattice points of the
    (N, L) block: points drawn uniformly without replacement in effect
    (duplicate draws are collapsed before weights are assigned)."""
    xs, ys = _shell_cache(N, geom.alpha1, geom.alpha2)
    q = geom.norm_sq(xs, ys)
    lo_p, hi_p, lo_n, hi_n = _tau_ranges_for_block(q, L, dtau)
    cp = np.maximum(hi_p - lo_p + 1, 0)
    cn = np.maximum(hi_n - lo_n + 1, 0)
    per_n = cp + cn
    total = int(per_n.sum())
    if total == 0:
        raise SupportError(f"block (N={N}, L={L}) is empty at dtau={dtau}")
    cum = np.cumsum(per_n)
    r = rng.integers(0, total, size=npoints)
    sel = np.searchsorted(cum, r, side="right")
    offset = r - (cum[sel] - per_n[sel])
    in_pos = offset < cp[sel]
    k = np.where(in_pos, lo_p[sel] + offset, lo_n[sel] + (offset - cp[sel]))
    uniq = np.unique(pack_keys(k, xs[sel], ys[sel]))
    t, a, b = unpack_keys(uniq)
    w = _draw_weights(rng, len(uniq), weights)
    return LatticeField(t, a, b, w, dtau)


def dense_block_field(N: int, L: int, rng, dtau: float = 1.0,
                      geom: TorusGeometry = UNIT_TORUS,
                      weights: str = "gaussian", cap: int = 200_000) -> LatticeField:
    """Field with independent weights on every lattice point of the block."""
    xs, ys = _shell_cache(N, geom.alpha1, geom.alpha2)
    q = geom.norm_sq(xs, ys)
    lo_p, hi_p, lo_n, hi_n = _tau_ranges_for_block(q, L, dtau)
    cp = np.maximum(hi_p - lo_p + 1, 0).astype(np.int64)
    cn = np.maximum(hi_n - lo_n + 1, 0).astype(np.int64)
    total = int((cp + cn).sum())
    if total == 0:
        raise SupportError(f"block (N={N}, L={L}) is empty at dtau={dtau}")
    if total > cap:
        raise ValueError(f"dense block has {total} points, above cap {cap}")
    reps = np.concatenate([cp, cn])
    xs2 = np.concatenate([xs, xs])
    ys2 = np.concatenate([ys, ys])
    los = np.concatenate([lo_p, lo_n])
    starts = np.repeat(los, reps)
    # per-point offsets 0..rep-1 within each run
    runs = np.repeat(np.cumsum(reps) - reps, reps)
    k = starts + (np.arange(len(starts)) - runs)
    w = _draw_weights(rng, len(k), weights)
    return canonicalize(LatticeField(k, np.repeat(xs2, reps), np.repeat(ys2, reps), w, dtau))


def validate_block_support(f: LatticeField, N: int, L: int,
                           geom: TorusGeometry = UNIT_TORUS) -> None:
    q = f.norm_sq_spatial(geom)
    if not spatial_block_contains(N, q).all():
        raise SupportError(f"spatial support escapes block N={N}")
    if not modulation_block_contains(L, f.modulations(geom)).all():
        raise SupportError(f"modulation support escapes block L={L}")


@dataclass
class BlockField:
    """Nonnegative real lattice field with a declared (N, L) block."""

    field: LatticeField
    N: int
    L: int

    def __post_init__(self):
        if np.iscomplexobj(self.field.w) or (self.field.w < 0).any():
            raise ValueError("block fields carry nonnegative real values")
        validate_block_support(self.field, self.N, self.L)


# -- conversions to/from dense grids ------------------------------------------


def from_spacetime(f: SpacetimeField) -> LatticeField:
    g = to_fourier(f)
    k, ix, iy = np.nonzero(g.coeffs)
    return LatticeField(
        (k - g.window.Mt // 2).astype(np.int64),
        (ix - g.grid.Mx // 2).astype(np.int64),
        (iy - g.grid.My // 2).astype(np.int64),
        g.coeffs[k, ix, iy],
        g.window.dtau,
    )


def to_spacetime(f: LatticeField, grid: SpaceGrid, window: TimeWindow) -> SpacetimeField:
    if abs(window.dtau - f.dtau) > 1e-12 * f.dtau:
        raise ValueError("window dtau does not match the lattice field")
    k = f.tau_idx + window.Mt // 2
    ix = f.n1 + grid.Mx // 2
    iy = f.n2 + grid.My // 2
    if ((k < 0) | (k >= window.Mt) | (ix < 0) | (ix >= grid.Mx)
            | (iy < 0) | (iy >= grid.My)).any():
        raise ValueError("lattice field does not fit the target grid")
    coeffs = np.zeros((window.Mt, grid.Mx, grid.My), dtype=complex)
    np.add.at(coeffs, (k, ix, iy), f.w)
    return SpacetimeField(grid, window, coeffs, FOURIER)
