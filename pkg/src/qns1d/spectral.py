"""Discrete torus geometry and Fourier-space primitives.

Fields live on the unit torus [0, 1) sampled at ``n_collocation`` equispaced
points. The spectral representation is the real FFT normalized so that mode 0
carries the field mean: ``f_hat = rfft(f) / n``. The Galerkin space keeps the
modes ``|j| <= m_modes`` (wavenumber ``k_j = 2*pi*j``); quadratic products are
additionally masked at ``floor(2*m_modes/3)`` so that the retained
coefficients of a pointwise product are free of aliasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridConfigError(ValueError):
    """Grid parameters violate a structural constraint."""


class UsageError(ValueError):
    """An operation was called outside its documented domain."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TorusGrid:
    """Collocation points, wavenumbers and mode masks for one resolution.

    ``wavenumbers`` holds the signed values 2*pi*j for j in [-n/2, n/2) in
    standard FFT ordering; ``k_half`` is the non-negative half used with the
    real FFT. ``dealias_mask`` (over the half spectrum) is True exactly for
    j <= floor(2*m_modes/3) when dealiasing is on, else for j <= m_modes.
    """

    n_collocation: int
    m_modes: int
    dealias: bool = True
    x: np.ndarray = field(init=False, repr=False)
    wavenumbers: np.ndarray = field(init=False, repr=False)
    k_half: np.ndarray = field(init=False, repr=False)
    dealias_mask: np.ndarray = field(init=False, repr=False)
    dealias_cut: int = field(init=False)

    def __post_init__(self) -> None:
        n, m = self.n_collocation, self.m_modes
        if n <= 0 or m <= 0:
            raise GridConfigError("n_collocation and m_modes must be positive")
        if n % 2 != 0:
            raise GridConfigError(f"n_collocation must be even, got {n}")
        if m > n // 2:
            raise GridConfigError(f"m_modes={m} exceeds n_collocation/2={n // 2}")
        if 3 * n < 4 * m:
            raise GridConfigError(
                f"n_collocation={n} below 4*m_modes/3={4 * m / 3:.1f}; "
                "2/3-rule dealiasing needs n >= 4m/3"
            )
        object.__setattr__(self, "x", _frozen(np.arange(n) / n))
        j_signed = np.fft.fftfreq(n, d=1.0 / n)
        object.__setattr__(self, "wavenumbers", _frozen(2.0 * np.pi * j_signed))
        j_half = np.arange(n // 2 + 1)
        object.__setattr__(self, "k_half", _frozen(2.0 * np.pi * j_half))
        cut = (2 * m) // 3 if self.dealias else m
        object.__setattr__(self, "dealias_cut", cut)
        object.__setattr__(self, "dealias_mask", _frozen(j_half <= cut))

    @property
    def n_half(self) -> int:
        return self.n_collocation // 2 + 1


@dataclass(frozen=True)
class RealField:
    """A real field with paired physical samples and spectral coefficients.

    Both representations are stored; constructors keep them consistent
    (``spectral = rfft(physical) / n``). Instances are immutable and safe to
    share across threads.
    """

    physical: np.ndarray
    spectral: np.ndarray

    @classmethod
    def from_physical(cls, values: np.ndarray, grid: TorusGrid) -> "RealField":
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n_collocation,):
            raise GridConfigError(
                f"physical length {values.shape} does not match grid n={grid.n_collocation}"
            )
        spec = np.fft.rfft(values) / grid.n_collocation
        return cls(_frozen(values.copy()), _frozen(spec))

    @classmethod
    def from_spectral(cls, coeffs: np.ndarray, grid: TorusGrid) -> "RealField":
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (grid.n_half,):
            raise GridConfigError(
                f"spectral length {coeffs.shape} does not match grid half-spectrum {grid.n_half}"
            )
        phys = np.fft.irfft(coeffs * grid.n_collocation, n=grid.n_collocation)
        return cls(_frozen(phys), _frozen(coeffs.copy()))

    @property
    def n(self) -> int:
        return self.physical.shape[0]


def transform_forward(values: np.ndarray, grid: TorusGrid) -> RealField:
    """Build a RealField from physical samples (mean-normalized spectrum)."""
    return RealField.from_physical(values, grid)


def transform_inverse(field: RealField, grid: TorusGrid) -> np.ndarray:
    """Physical samples reconstructed from the spectral coefficients."""
    return np.fft.irfft(field.spectral * grid.n_collocation, n=grid.n_collocation)


def project(field: RealField, grid: TorusGrid) -> RealField:
    """L2-orthogonal projection onto the Galerkin band |j| <= m_modes."""
    spec = field.spectral.copy()
    spec[grid.m_modes + 1 :] = 0.0
    return RealField.from_spectral(spec, grid)


def project_spectral(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    out = coeffs.copy()
    out[grid.m_modes + 1 :] = 0.0
    return out


def derivative(field: RealField, order: int, grid: TorusGrid) -> RealField:
    """Spectral derivative: multiply coefficients by (i*k)^order.

    Applied as `order` successive multiplications by i*k, which are exact
    swap-negate-scale operations, so composing first derivatives is
    bit-identical to one higher-order call. The Nyquist mode is zeroed for
    odd orders (its sine component is not representable on the grid).
    """
    if order < 1 or order > 4:
        raise UsageError(f"derivative order must be in 1..4, got {order}")
    spec = field.spectral.copy()
    for _ in range(order):
        spec = spec * (1j * grid.k_half)
    if order % 2 == 1:
        spec[-1] = 0.0
    return RealField.from_spectral(spec, grid)


def derivative_values(field: RealField, order: int, grid: TorusGrid) -> np.ndarray:
    return derivative(field, order, grid).physical


def dealias_product(a: RealField, b: RealField, grid: TorusGrid) -> RealField:
    """Pointwise product of two band-limited fields, masked and projected.

    The product is formed in physical space, on an internally padded grid
    when n_collocation is too small for the retained band to be alias-free
    (needs n >= 2*m_modes + dealias_cut + 2), then masked by dealias_mask.
    """
    n = grid.n_collocation
    need = 2 * grid.m_modes + grid.dealias_cut + 2
    if n >= need:
        prod = a.physical * b.physical
        spec = np.fft.rfft(prod) / n
    else:
        n_pad = need + (need % 2)
        pa = np.fft.irfft(_pad_half(a.spectral, n_pad) * n_pad, n=n_pad)
        pb = np.fft.irfft(_pad_half(b.spectral, n_pad) * n_pad, n=n_pad)
        spec = (np.fft.rfft(pa * pb) / n_pad)[: grid.n_half]
    spec = np.where(grid.dealias_mask, spec, 0.0)
    return RealField.from_spectral(project_spectral(spec, grid), grid)


def _pad_half(spec: np.ndarray, n_pad: int) -> np.ndarray:
    out = np.zeros(n_pad // 2 + 1, dtype=complex)
    out[: spec.shape[0]] = spec
    return out


def resample(field: RealField, grid: TorusGrid, n_fine: int) -> np.ndarray:
    """Spectrally interpolate the field onto n_fine equispaced points."""
    if n_fine < grid.n_collocation:
        raise UsageError("resample only upsamples")
    return np.fft.irfft(_pad_half(field.spectral, n_fine) * n_fine, n=n_fine)


def _mode_multiplicity(grid: TorusGrid) -> np.ndarray:
    # modes 0 and n/2 appear once in the half spectrum, all others twice
    mult = np.full(grid.n_half, 2.0)
    mult[0] = 1.0
    mult[-1] = 1.0
    return mult


def l2_norm(field: RealField, grid: TorusGrid) -> float:
    """Spectral L2 norm (Parseval): |f_0|^2 + 2*sum_{0<j<n/2} |f_j|^2 + |f_{n/2}|^2."""
    c2 = np.abs(field.spectral) ** 2
    return float(np.sqrt(np.sum(_mode_multiplicity(grid) * c2)))


def hs_norm(field: RealField, s: float, grid: TorusGrid) -> float:
    """Sobolev H^s norm, diagonal in the Fourier basis: (sum (1+k^2)^s |f_j|^2)^1/2."""
    c2 = np.abs(field.spectral) ** 2
    w = (1.0 + grid.k_half**2) ** s
    return float(np.sqrt(np.sum(_mode_multiplicity(grid) * w * c2)))
