"""Spacetime norms: X^{s,b}, the fixed-cutoff restriction-norm upper bound,
and L^p quadrature norms.

The restriction norm over a time interval [-T, T] is an infimum over
extensions; everywhere in this package it is replaced by the norm of one
fixed extension u * eta with a cutoff eta supported in [-2T, 2T] and equal
to 1 on [-T, T].  That surrogate is an upper bound, which preserves the
direction of every inequality probed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fields import (
    FOURIER,
    SpacetimeField,
    TimeWindow,
    time_modes,
    time_to_fourier,
    to_fourier,
)


def bracket(x):
    """Japanese bracket <x> = (1 + x^2)^(1/2)."""
    return np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2)


@dataclass(frozen=True)
class XsbParams:
    """Exponents of the spatial weight <n>^s and modulation weight <tau+|n|^2>^b."""

    s: float
    b: float


SMOOTH_BUMP = "smooth-bump"
COSINE_TAPER = "cosine-taper"


@dataclass(frozen=True)
class CutoffProfile:
    """Time cutoff equal to 1 on [-T, T] and supported in [-2T, 2T]."""

    shape: str = SMOOTH_BUMP
    T: float = 1.0

    def __post_init__(self):
        if self.shape not in (SMOOTH_BUMP, COSINE_TAPER):
            raise ValueError("shape must be 'smooth-bump' or 'cosine-taper'")
        if self.T <= 0:
            raise ValueError("T must be positive")

    def values(self, t) -> np.ndarray:
        a = np.abs(np.asarray(t, dtype=float)) / self.T
        if self.shape == COSINE_TAPER:
            out = np.where(a <= 1.0, 1.0, np.cos(np.pi * np.clip(a - 1.0, 0.0, 1.0) / 2.0) ** 2)
            return np.where(a >= 2.0, 0.0, out)
        # smooth bump: f(s)/(f(s) + f(1-s)) with f(s) = exp(-1/s) for s > 0
        s = 2.0 - a
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            fs = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
            f1 = np.where(1 - s > 0, np.exp(-1.0 / np.where(1 - s > 0, 1 - s, 1.0)), 0.0)
        return fs / (fs + f1)


@lru_cache(maxsize=32)
def cutoff_kernel(shape: str, T: float, twin: float, n_fine: int = 16384,
                  tol: float = 1e-15):
    """Fourier-series coefficients of the window-periodized cutoff.

    Returns (offsets, taps): eta(t) = sum_m taps[m] exp(i offsets[m] dtau t).
    Multiplying a field by eta is convolution of its tau-coefficients with
    these taps.  Taps below tol * max are dropped.
    """
    if not (0 < T <= twin / 4.0):
        raise ValueError("need 0 < T <= Twin/4 so the cutoff fits the window")
    fine = TimeWindow(twin, n_fine)
    eta = CutoffProfile(shape, T).values(fine.t_axis)
    coeffs = time_to_fourier(eta, fine) * fine.dtau / math.sqrt(2.0 * math.pi)
    offsets = np.arange(n_fine) - n_fine // 2
    keep = np.abs(coeffs) > tol * np.abs(coeffs).max()
    return offsets[keep].copy(), coeffs[keep].copy()


def xsb_norm(f: SpacetimeField, p: XsbParams) -> float:
    """Weighted norm (dtau sum <n>^{2s} <tau+|n|_a^2>^{2b} |uhat|^2)^(1/2)."""
    g = to_fourier(f)
    q = g.grid.mode_norm_sq()[None, :, :]
    lam = g.window.tau_axis[:, None, None] + q
    w = bracket(np.sqrt(q)) ** p.s * bracket(lam) ** p.b
    return float(math.sqrt(g.window.dtau) * np.linalg.norm(w * g.coeffs))


def xsb_restriction_norm_ub(f: SpacetimeField, p: XsbParams, T: float,
                            cut: CutoffProfile) -> float:
    """Upper bound for the [-T, T] restriction norm via the fixed extension
    f * eta; requires 0 < T <= Twin/4 so that eta is supported in the window."""
    if not (0 < T <= f.window.Twin / 4.0):
        raise ValueError("need 0 < T <= Twin/4")
    eta = CutoffProfile(cut.shape, T).values(f.window.t_axis)
    tm = time_modes(f) * eta[:, None, None]
    coeffs = time_to_fourier(tm, f.window)
    cutf = SpacetimeField(f.grid, f.window, coeffs, FOURIER)
    return xsb_norm(cutf, p)


def lp_spacetime_norm(f: SpacetimeField, p, interval=None) -> float:
    """Quadrature L^p norm over interval x torus (Lebesgue dt, normalized dx).

    interval defaults to the full window; p must be 2, 3 or 4.
    """
    if p not in (2, 3, 4):
        raise ValueError("p must be one of 2, 3, 4")
    from .fields import to_physical

    g = to_physical(f)
    t = g.window.t_axis
    dt = g.window.dt
    if interval is None:
        w = np.full_like(t, dt)
    else:
        a, b = interval
        if a < t[0] - dt / 2 or b > g.window.Twin / 2.0 + 1e-12:
            raise ValueError("interval must lie inside the window")
        # overlap of each sample's cell [t_j - dt/2, t_j + dt/2) with [a, b]
        w = np.clip(np.minimum(b, t + dt / 2) - np.maximum(a, t - dt / 2), 0.0, dt)
    vals = np.abs(g.coeffs) ** p
    return float((w @ vals.mean(axis=(1, 2))) ** (1.0 / p))
