"""Discrete fields on (time window x torus) grids and their transforms.

Conventions (used consistently by every norm and probe in the package):

  * space: the torus carries the normalized measure, harmonics are
    e_n(x) = exp(i(n1 x1/alpha1 + n2 x2/alpha2)); spatial coefficients are
    means, so a plane wave has a single unit coefficient;
  * time: the window is t in [-Twin/2, Twin/2) sampled at Mt points, the
    dual variable runs over tau_k = k * dtau with dtau = 2*pi/Twin, and the
    transform pair is unitary between the dt-weighted and dtau-weighted
    inner products, so Parseval is an exact equality:
        dt * sum_j |u(t_j)|^2 = dtau * sum_k |uhat(tau_k)|^2;
  * mode storage is centered: axis index i maps to frequency i - M/2.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, replace

import numpy as np

from .lattice import (
    UNIT_TORUS,
    TorusGeometry,
    modulation_block_contains,
    spatial_block_contains,
)


class EmptyBlockError(ValueError):
    """A requested (N, L) block has no representable grid points."""


def _is_pow2(m: int) -> bool:
    return m >= 2 and (m & (m - 1)) == 0


@dataclass(frozen=True)
class SpaceGrid:
    """Spatial mode grid: frequencies n_i in [-M_i/2, M_i/2), powers of two."""

    Mx: int
    My: int
    geom: TorusGeometry = UNIT_TORUS

    def __post_init__(self):
        if not (_is_pow2(self.Mx) and _is_pow2(self.My)):
            raise ValueError("Mx and My must be even powers of two")

    @property
    def n1_axis(self) -> np.ndarray:
        return np.arange(self.Mx) - self.Mx // 2

    @property
    def n2_axis(self) -> np.ndarray:
        return np.arange(self.My) - self.My // 2

    def mode_norm_sq(self) -> np.ndarray:
        """Dispersion symbol |n|_a^2 on the (Mx, My) mode grid."""
        n1 = self.n1_axis[:, None]
        n2 = self.n2_axis[None, :]
        return self.geom.norm_sq(n1, n2)

    @property
    def size(self) -> int:
        return self.Mx * self.My


@dataclass(frozen=True)
class TimeWindow:
    """Centered time window of length Twin sampled at Mt points."""

    Twin: float
    Mt: int

    def __post_init__(self):
        if self.Twin <= 0:
            raise ValueError("window length must be positive")
        if self.Mt < 2 or self.Mt % 2:
            raise ValueError("Mt must be a positive even integer")

    @property
    def dt(self) -> float:
        return self.Twin / self.Mt

    @property
    def dtau(self) -> float:
        return 2.0 * math.pi / self.Twin

    @property
    def t_axis(self) -> np.ndarray:
        return (np.arange(self.Mt) - self.Mt // 2) * self.dt

    @property
    def tau_axis(self) -> np.ndarray:
        return (np.arange(self.Mt) - self.Mt // 2) * self.dtau


DEFAULT_WINDOW = TimeWindow(Twin=2.0 * math.pi, Mt=256)


# -- spatial fields ----------------------------------------------------------


@dataclass(frozen=True)
class SpatialField:
    """A field on the torus, stored as centered Fourier modes."""

    grid: SpaceGrid
    modes: np.ndarray

    def __post_init__(self):
        if self.modes.shape != (self.grid.Mx, self.grid.My):
            raise ValueError("mode array does not match the grid")

    @classmethod
    def zeros(cls, grid: SpaceGrid) -> "SpatialField":
        return cls(grid, np.zeros((grid.Mx, grid.My), dtype=complex))

    @classmethod
    def from_values(cls, grid: SpaceGrid, values: np.ndarray) -> "SpatialField":
        return cls(grid, space_to_modes(values))

    @classmethod
    def single_mode(cls, grid: SpaceGrid, n1: int, n2: int,
                    amp: complex = 1.0) -> "SpatialField":
        f = np.zeros((grid.Mx, grid.My), dtype=complex)
        f[n1 + grid.Mx // 2, n2 + grid.My // 2] = amp
        return cls(grid, f)

    def values(self) -> np.ndarray:
        return modes_to_space(self.modes)

    def mean(self) -> complex:
        """The average over the torus (zero-mode coefficient)."""
        return complex(self.modes[self.grid.Mx // 2, self.grid.My // 2])

    def l2(self) -> float:
        return float(np.linalg.norm(self.modes))

    def hs_norm(self, s: float) -> float:
        w = (1.0 + self.grid.mode_norm_sq()) ** (s / 2.0)
        return float(np.linalg.norm(w * self.modes))


def space_to_modes(values: np.ndarray) -> np.ndarray:
    """Physical samples -> centered mean-normalized modes (last two axes)."""
    mx, my = values.shape[-2], values.shape[-1]
    spec = np.fft.fft2(values, axes=(-2, -1)) / (mx * my)
    return np.fft.fftshift(spec, axes=(-2, -1))


def modes_to_space(modes: np.ndarray) -> np.ndarray:
    """Centered modes -> physical samples (last two axes)."""
    mx, my = modes.shape[-2], modes.shape[-1]
    return np.fft.ifft2(np.fft.ifftshift(modes, axes=(-2, -1)), axes=(-2, -1)) * (mx * my)


def free_propagate(phi: SpatialField, t: float) -> SpatialField:
    """exp(it Laplacian): mode n picks up exp(-i t |n|_a^2); an L^2 isometry."""
    phase = np.exp(-1j * t * phi.grid.mode_norm_sq())
    return SpatialField(phi.grid, phi.modes * phase)


# -- spacetime fields --------------------------------------------------------

PHYSICAL = "physical"
FOURIER = "fourier"


@dataclass(frozen=True)
class SpacetimeField:
    """Complex coefficients on a (time-or-tau, n1, n2) grid.

    rep == 'physical': coeffs[j, mx, my] = u(t_j, x_m).
    rep == 'fourier':  coeffs[k, ix, iy] = uhat(tau_k, n), centered storage.
    """

    grid: SpaceGrid
    window: TimeWindow
    coeffs: np.ndarray
    rep: str = PHYSICAL

    def __post_init__(self):
        if self.rep not in (PHYSICAL, FOURIER):
            raise ValueError("rep must be 'physical' or 'fourier'")
        expect = (self.window.Mt, self.grid.Mx, self.grid.My)
        if self.coeffs.shape != expect:
            raise ValueError(f"coefficient array must have shape {expect}")

    @classmethod
    def zeros(cls, grid: SpaceGrid, window: TimeWindow, rep: str = PHYSICAL):
        return cls(grid, window, np.zeros((window.Mt, grid.Mx, grid.My), dtype=complex), rep)


def _time_sign(mt: int) -> np.ndarray:
    kprime = np.arange(mt) - mt // 2
    return np.where(kprime % 2 == 0, 1.0, -1.0)


def time_to_fourier(values: np.ndarray, window: TimeWindow) -> np.ndarray:
    """Time axis (axis 0) physical -> centered tau coefficients."""
    gamma = window.dt / math.sqrt(2.0 * math.pi)
    spec = np.fft.fftshift(np.fft.fft(values, axis=0), axes=0)
    sign = _time_sign(window.Mt).reshape((-1,) + (1,) * (values.ndim - 1))
    return gamma * sign * spec

def time_to_physical(coeffs: np.ndarray, window: TimeWindow) -> np.ndarray:
    """Centered tau coefficients -> physical time samples (axis 0)."""
    beta = window.dtau / math.sqrt(2.0 * math.pi)
    sign = _time_sign(window.Mt).reshape((-1,) + (1,) * (coeffs.ndim - 1))
    return beta * window.Mt * np.fft.ifft(np.fft.ifftshift(coeffs * sign, axes=0), axis=0)


def to_fourier(f: SpacetimeField) -> SpacetimeField:
    if f.rep == FOURIER:
        return f
    return SpacetimeField(
        f.grid, f.window, time_to_fourier(space_to_modes(f.coeffs), f.window), FOURIER
    )


def to_physical(f: SpacetimeField) -> SpacetimeField:
    if f.rep == PHYSICAL:
        return f
    return SpacetimeField(
        f.grid, f.window, modes_to_space(time_to_physical(f.coeffs, f.window)), PHYSICAL
    )


def time_modes(f: SpacetimeField) -> np.ndarray:
    """Mixed representation: time physical, space in centered modes."""
    if f.rep == PHYSICAL:
        return space_to_modes(f.coeffs)
    return time_to_physical(f.coeffs, f.window)


def from_time_modes(grid: SpaceGrid, window: TimeWindow, tm: np.ndarray) -> SpacetimeField:
    return SpacetimeField(grid, window, modes_to_space(tm), PHYSICAL)


def free_orbit(phi: SpatialField, window: TimeWindow) -> SpacetimeField:
    """The free evolution of phi sampled on the window (physical rep)."""
    t = window.t_axis[:, None, None]
    tm = phi.modes[None, :, :] * np.exp(-1j * t * phi.grid.mode_norm_sq()[None, :, :])
    return from_time_modes(phi.grid, window, tm)


def l2_spacetime(f: SpacetimeField) -> float:
    """L^2 over the full window (Lebesgue dt, normalized dx)."""
    if f.rep == FOURIER:
        return float(math.sqrt(f.window.dtau) * np.linalg.norm(f.coeffs))
    return float(
        math.sqrt(f.window.dt / f.grid.size) * np.linalg.norm(f.coeffs)
    )


def dealias_mask(grid: SpaceGrid) -> np.ndarray:
    """Modes retained by the 2/3 rule: |n_i| <= M_i // 3 per axis."""
    kx, ky = grid.Mx // 3, grid.My // 3
    m1 = np.abs(grid.n1_axis) <= kx
    m2 = np.abs(grid.n2_axis) <= ky
    return m1[:, None] & m2[None, :]


def product_field(u: SpacetimeField, v: SpacetimeField,
                  conj: tuple = (False, True)) -> SpacetimeField:
    """Pointwise spacetime product with the requested conjugations.

    Inputs are projected onto the 2/3-rule retained modes in space, which
    makes the spatial convolution exact on the retained band of the output;
    the product itself is taken pointwise on the physical grid and returned
    unmasked.  The time direction is left aliased (callers choose windows
    wide enough for the active modulation band).
    """
    if u.grid != v.grid or u.window != v.window:
        raise ValueError("fields must share one grid and window")
    mask = dealias_mask(u.grid)[None, :, :]
    av = modes_to_space(time_modes(u) * mask)
    bv = modes_to_space(time_modes(v) * mask)
    if conj[0]:
        av = np.conj(av)
    if conj[1]:
        bv = np.conj(bv)
    return SpacetimeField(u.grid, u.window, av * bv, PHYSICAL)


def random_block_field(grid: SpaceGrid, window: TimeWindow, N: int, L: int,
                       seed) -> SpacetimeField:
    """Standard complex Gaussian coefficients on the grid points of the
    (N, L) block, zero elsewhere; deterministic under the seed."""
    q = grid.mode_norm_sq()[None, :, :]
    lam = window.tau_axis[:, None, None] + q
    mask = spatial_block_contains(N, q) & modulation_block_contains(L, lam)
    npts = int(mask.sum())
    if npts == 0:
        tau = window.tau_axis
        raise EmptyBlockError(
            f"block (N={N}, L={L}) has no grid points: grid |n1|<{grid.Mx // 2}, "
            f"|n2|<{grid.My // 2}, tau in [{tau[0]:.3g}, {tau[-1]:.3g}] "
            f"with spacing {window.dtau:.3g}"
        )
    rng = np.random.default_rng(seed)
    shape = (window.Mt, grid.Mx, grid.My)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    return SpacetimeField(grid, window, np.where(mask, z, 0.0), FOURIER)


# -- serialization -----------------------------------------------------------

_HEADER = struct.Struct("<iiidddB")


def save_binary(f: SpacetimeField, path) -> None:
    """Flat layout: header (Mx, My, Mt, Twin, alpha1, alpha2, rep flag),
    then row-major little-endian complex doubles."""
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                f.grid.Mx, f.grid.My, f.window.Mt, f.window.Twin,
                f.grid.geom.alpha1, f.grid.geom.alpha2,
                0 if f.rep == PHYSICAL else 1,
            )
        )
        fh.write(np.ascontiguousarray(f.coeffs).astype("<c16").tobytes())


def load_binary(path) -> SpacetimeField:
    with open(path, "rb") as fh:
        mx, my, mt, twin, a1, a2, flag = _HEADER.unpack(fh.read(_HEADER.size))
        raw = fh.read()
    coeffs = np.frombuffer(raw, dtype="<c16").reshape(mt, mx, my).astype(complex)
    grid = SpaceGrid(mx, my, TorusGeometry(a1, a2))
    window = TimeWindow(twin, mt)
    return SpacetimeField(grid, window, coeffs, PHYSICAL if flag == 0 else FOURIER)


_JSON_MAX_POINTS = 65536


def to_json_dict(f: SpacetimeField) -> dict:
    if f.coeffs.size > _JSON_MAX_POINTS:
        raise ValueError("JSON serialization is limited to small grids")
    return {
        "Mx": f.grid.Mx,
        "My": f.grid.My,
        "Mt": f.window.Mt,
        "Twin": f.window.Twin,
        "alpha1": f.grid.geom.alpha1,
        "alpha2": f.grid.geom.alpha2,
        "rep": f.rep,
        "re": f.coeffs.real.ravel().tolist(),
        "im": f.coeffs.imag.ravel().tolist(),
    }


def from_json_dict(d: dict) -> SpacetimeField:
    grid = SpaceGrid(d["Mx"], d["My"], TorusGeometry(d["alpha1"], d["alpha2"]))
    window = TimeWindow(d["Twin"], d["Mt"])
    coeffs = (np.asarray(d["re"]) + 1j * np.asarray(d["im"])).reshape(
        d["Mt"], d["Mx"], d["My"]
    )
    return SpacetimeField(grid, window, coeffs, d["rep"])


def save_json(f: SpacetimeField, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json_dict(f), fh)


def load_json(path) -> SpacetimeField:
    with open(path) as fh:
        return from_json_dict(json.load(fh))
