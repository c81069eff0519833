"""Independent brute-force references for tests and acceptance criteria.

Everything here is intentionally simple and slow: direct O(m^2) convolution
sums, trapezoid quadrature, naive trigonometric summation, explicit time
stepping. None of it shares a code path with the production implementations;
independence is the point.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .integrator import StepConfig, _Stepper
from .model import ModelParams, State
from .noise import NoiseModel
from .spectral import RealField, TorusGrid


class CflError(ValueError):
    """Requested step exceeds the explicit-scheme stability bound."""


@dataclass(frozen=True)
class OracleReport:
    quantity: str
    primary_value: float
    oracle_value: float
    abs_discrepancy: float
    rel_discrepancy: float
    resolution: dict

    @classmethod
    def compare(cls, quantity: str, primary: float, oracle: float,
                resolution: dict | None = None) -> "OracleReport":
        denom = max(abs(primary), abs(oracle), 1e-300)
        return cls(quantity=quantity, primary_value=float(primary),
                   oracle_value=float(oracle),
                   abs_discrepancy=abs(primary - oracle),
                   rel_discrepancy=abs(primary - oracle) / denom,
                   resolution=resolution or {})

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def dense_quadrature(integrand: Callable[..., np.ndarray],
                     fields: Sequence[RealField], grid: TorusGrid,
                     oversample: int = 8) -> float:
    """Trapezoid quadrature of integrand(x, *interpolated fields) on [0, 1).

    Fields are interpolated spectrally by direct summation of their Fourier
    series on the oversampled grid (no FFT involved). On a periodic uniform
    grid the trapezoid rule reduces to the plain average.
    """
    if oversample < 4:
        raise ValueError("oversample factor must be at least 4")
    n_fine = oversample * grid.n_collocation
    x = np.arange(n_fine) / n_fine
    values = [trig_eval(f, grid, x) for f in fields]
    return float(np.mean(integrand(x, *values)))


def trig_eval(field: RealField, grid: TorusGrid, x: np.ndarray,
              order: int = 0) -> np.ndarray:
    """Direct summation of the (differentiated) Fourier series at points x."""
    out = np.zeros_like(x)
    for j in range(grid.n_half):
        k = 2.0 * np.pi * j
        c = field.spectral[j] * (1j * k) ** order
        if j == 0 or j == grid.n_collocation // 2:
            out = out + np.real(c * np.exp(2j * np.pi * j * x))
        else:
            out = out + 2.0 * np.real(c * np.exp(2j * np.pi * j * x))
    return out


def convolution_product(a: RealField, b: RealField, grid: TorusGrid,
                        keep: int) -> np.ndarray:
    """Mode coefficients of a*b for |j| <= keep by the direct convolution sum.

    Operates on the full signed spectra reconstructed from the half spectra;
    O(m^2) and exact up to rounding (no grids, no FFTs).
    """
    def signed(f: RealField) -> dict[int, complex]:
        coeffs = {}
        for j in range(grid.n_half):
            coeffs[j] = complex(f.spectral[j])
            if j > 0:
                coeffs[-j] = complex(np.conj(f.spectral[j]))
        return coeffs

    ca, cb = signed(a), signed(b)
    m = grid.n_collocation // 2
    out = np.zeros(keep + 1, dtype=complex)
    for j in range(keep + 1):
        total = 0.0 + 0.0j
        for p in range(-m, m + 1):
            q = j - p
            if -m <= q <= m and p in ca and q in cb:
                total += ca[p] * cb[q]
        out[j] = total
    return out


def fd_derivative(values: np.ndarray, order: int, h: float) -> np.ndarray:
    """6th-order centered finite differences with periodic wrap."""
    if order == 1:
        weights = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / (60.0 * h)
    elif order == 2:
        weights = np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / (180.0 * h**2)
    else:
        raise ValueError("finite-difference oracle supports orders 1 and 2")
    out = np.zeros_like(values)
    for offset, w in zip(range(-3, 4), weights):
        out += w * np.roll(values, -offset)
    return out


def linear_propagator(k: float, gamma: float, visc: float, t: float) -> np.ndarray:
    """Exact 2x2 solution operator of the constant-coefficient linearization.

    Around (psi, u) = (0, 0): d psi = -ik u dt, d u = (-(i/2)k^3 - i*gamma*k) psi dt
    - visc k^2 u dt. Evaluated with the matrix exponential.
    """
    a = np.array([[0.0, -1j * k],
                  [-0.5j * k**3 - 1j * gamma * k, -visc * k**2]], dtype=complex)
    return expm(a * t)


def rk4_stability_limit(grid: TorusGrid, params: ModelParams,
                        nu_max: float = 1.5) -> float:
    """Explicit step bound: the skew pair rotates at k^2/sqrt(2), viscosity damps at nu k^2.

    The documented guard dt <= 1/m^3 is enforced alongside (conservative for
    small m, where the constant matters less).
    """
    k_max = 2.0 * np.pi * grid.m_modes
    omega = k_max**2 / np.sqrt(2.0) + nu_max * k_max**2
    return min(2.5 / omega, 1.0 / grid.m_modes**3)


def reference_trajectory(initial: State, params: ModelParams, grid: TorusGrid,
                         t_end: float, dt_fine: float,
                         shared_path: Sequence[np.ndarray] | None = None,
                         noise: NoiseModel | None = None) -> State:
    """Explicit RK4 (deterministic part) + Euler-Maruyama (noise) at dt_fine."""
    limit = rk4_stability_limit(grid, params)
    if dt_fine > limit:
        raise CflError(
            f"dt_fine={dt_fine:.3e} exceeds the explicit stability bound "
            f"{limit:.3e} for m={grid.m_modes}; use a smaller dt_fine")
    if noise is None:
        noise = NoiseModel(base_amplitude=0.0)
    cfg = StepConfig(dt=dt_fine, t_end=t_end, scheme="explicit_rk4_det")
    stepper = _Stepper(grid, params, cfg, noise)
    psi_spec = initial.psi.spectral.copy()
    u_spec = initial.u.spectral.copy()
    t = initial.time
    from .noise import WienerIncrement
    for i in range(cfg.n_steps):
        inc = None
        if shared_path is not None:
            inc = WienerIncrement(np.asarray(shared_path[i]), i, f"shared:{i}")
        psi_spec, u_spec = stepper.step_rk4(psi_spec, u_spec, t, inc)
        t = initial.time + (i + 1) * stepper.dt
    return State(psi=RealField.from_spectral(psi_spec, grid),
                 u=RealField.from_spectral(u_spec, grid), time=t)
