"""Conserved/dissipated functionals, entropy identities, and runtime monitors.

All integrals are evaluated by periodic trapezoid quadrature (the grid mean)
on an oversampled grid: the integrands are non-polynomial in the spectral
coefficients (powers and exponentials of rho), so quadrature on the bare
collocation grid would alias.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import DomainError, ModelParams, State, w2inf_norm
from .spectral import RealField, TorusGrid, hs_norm, resample

QUAD_OVERSAMPLE = 2


def _fine(field: RealField, grid: TorusGrid, ov: int) -> np.ndarray:
    return resample(field, grid, ov * grid.n_collocation)


def _fine_d(values: np.ndarray, order: int) -> np.ndarray:
    n = values.shape[0]
    k = 2.0 * np.pi * np.fft.rfftfreq(n, 1.0 / n)
    return np.fft.irfft(np.fft.rfft(values) * (1j * k) ** order, n=n)


def _quad(values: np.ndarray) -> float:
    return float(np.mean(values))


@dataclass(frozen=True)
class MonitorRecord:
    """Time-stamped values of every tracked functional."""

    time: float
    mass: float
    energy: float
    energy_dissipation_rate: float
    bd_entropy: float
    bd_terms: tuple[float, float, float]
    min_rho: float
    inv_rho_beta_norm: float
    hs_norms: tuple[float, float]
    w2inf_norms: tuple[float, float]

    CSV_HEADER = (
        "time,mass,energy,energy_dissipation_rate,bd_entropy,"
        "bd_term_pressure,bd_term_second_order,bd_term_quartic,"
        "min_rho,inv_rho_beta_norm,hs_norm_psi,hs_norm_u,w2inf_psi,w2inf_u"
    )

    def to_row(self) -> list[float]:
        return [
            self.time, self.mass, self.energy, self.energy_dissipation_rate,
            self.bd_entropy, *self.bd_terms, self.min_rho, self.inv_rho_beta_norm,
            *self.hs_norms, *self.w2inf_norms,
        ]


def mass(state: State, grid: TorusGrid, oversample: int = QUAD_OVERSAMPLE) -> float:
    """Total mass: integral of rho = exp(psi) over the torus."""
    return _quad(np.exp(_fine(state.psi, grid, oversample)))


def energy(state: State, params: ModelParams, grid: TorusGrid,
           oversample: int = QUAD_OVERSAMPLE) -> float:
    """Integral of rho*u^2/2 + rho^gamma/(gamma-1) + |d/dx sqrt(rho)|^2."""
    psi = _fine(state.psi, grid, oversample)
    u = _fine(state.u, grid, oversample)
    dpsi = _fine_d(psi, 1)
    rho = np.exp(psi)
    integrand = (0.5 * rho * u**2
                 + np.exp(params.gamma * psi) / (params.gamma - 1.0)
                 + 0.25 * dpsi**2 * rho)
    return _quad(integrand)


def energy_dissipation_rate(state: State, params: ModelParams, grid: TorusGrid,
                            oversample: int = QUAD_OVERSAMPLE) -> float:
    """Viscous dissipation: integral of rho^alpha |du/dx|^2."""
    psi = _fine(state.psi, grid, oversample)
    du = _fine_d(_fine(state.u, grid, oversample), 1)
    return _quad(np.exp(params.alpha * psi) * du**2)


def effective_velocity(state: State, params: ModelParams, grid: TorusGrid) -> RealField:
    """V = u + Q with Q = rho^(alpha-2) * drho/dx = exp((alpha-1)psi) * dpsi/dx.

    For alpha = 0 the viscosity is the constant 1 and Q = drho/dx / rho^2,
    which is the same formula.
    """
    dpsi = _fine_d(state.psi.physical, 1)
    q = np.exp((params.alpha - 1.0) * state.psi.physical) * dpsi
    return RealField.from_physical(state.u.physical + q, grid)


def bd_entropy(state: State, params: ModelParams, grid: TorusGrid,
               oversample: int = QUAD_OVERSAMPLE) -> float:
    """Energy functional with the velocity replaced by the effective velocity."""
    psi = _fine(state.psi, grid, oversample)
    u = _fine(state.u, grid, oversample)
    dpsi = _fine_d(psi, 1)
    rho = np.exp(psi)
    v = u + np.exp((params.alpha - 1.0) * psi) * dpsi
    integrand = (0.5 * rho * v**2
                 + np.exp(params.gamma * psi) / (params.gamma - 1.0)
                 + 0.25 * dpsi**2 * rho)
    return _quad(integrand)


def bd_dissipation_terms(state: State, params: ModelParams, grid: TorusGrid,
                         oversample: int = QUAD_OVERSAMPLE) -> tuple[float, float, float]:
    """The weighted entropy-dissipation integrals, reported individually.

    For alpha != 0:
      ( 4*gamma/(gamma+alpha-1)^2 * int |d rho^((gamma+alpha-1)/2)|^2,
        4/alpha^2               * int |d^2 rho^(alpha/2)|^2,
        4(4-3*alpha)/(3*alpha^3) * int rho^(-alpha) |d rho^(alpha/2)|^4 )
    For alpha = 0 (viscosity constant 1) the second-order slot is
    (1/2) int (d^2 log rho)^2 and the quartic slot is zero.
    """
    gamma, alpha = params.gamma, params.alpha
    psi = _fine(state.psi, grid, oversample)
    rho = np.exp(psi)
    p1 = 0.5 * (gamma + alpha - 1.0)
    d_pressure = _fine_d(rho**p1, 1)
    term1 = 4.0 * gamma / (gamma + alpha - 1.0) ** 2 * _quad(d_pressure**2)
    if alpha == 0.0:
        term2 = 0.5 * _quad(_fine_d(psi, 2) ** 2)
        term3 = 0.0
    else:
        half = rho ** (0.5 * alpha)
        term2 = 4.0 / alpha**2 * _quad(_fine_d(half, 2) ** 2)
        term3 = (4.0 * (4.0 - 3.0 * alpha) / (3.0 * alpha**3)
                 * _quad(rho ** (-alpha) * _fine_d(half, 1) ** 4))
    return (term1, term2, term3)


def bd_pressure_identity_residual(rho: RealField, params: ModelParams,
                                  grid: TorusGrid, oversample: int = 4) -> float:
    """|LHS - RHS| of the pressure-entropy identity, both sides by quadrature.

    LHS = int d(rho^gamma)/dx * Q dx with Q = rho^(alpha-2) * drho/dx;
    RHS = 4*gamma/(gamma+alpha-1)^2 * int |d rho^((gamma+alpha-1)/2)/dx|^2.
    """
    gamma, alpha = params.gamma, params.alpha
    if abs(gamma + alpha - 1.0) < 1e-12:
        raise DomainError("gamma + alpha = 1 degenerates the pressure identity")
    if np.any(rho.physical <= 0.0):
        raise DomainError("density must be strictly positive pointwise")
    r = np.abs(resample(rho, grid, oversample * grid.n_collocation))
    q = r ** (alpha - 2.0) * _fine_d(r, 1)
    lhs = _quad(_fine_d(r**gamma, 1) * q)
    rhs = (4.0 * gamma / (gamma + alpha - 1.0) ** 2
           * _quad(_fine_d(r ** (0.5 * (gamma + alpha - 1.0)), 1) ** 2))
    return abs(lhs - rhs)


def bd_quantum_identity_residual(rho: RealField, alpha: float, grid: TorusGrid,
                                 oversample: int = 4) -> float:
    """|I_direct - I_closed| for the theta = alpha/2 entropy-dissipation identity.

    I_direct = 2 * int d/dx(rho^(alpha-1) drho/dx) * (d^2 sqrt(rho)/sqrt(rho)) dx;
    I_closed = 4(4-3a)/(3a^3) int rho^-a |d rho^(a/2)|^4 + 4/a^2 int |d^2 rho^(a/2)|^2.
    The factor 2 makes the two sides equal as integrals (checked numerically
    to machine precision across alpha); without it they differ by exactly 2.
    """
    if alpha == 0.0:
        raise DomainError("alpha = 0 uses the separate log-density dissipation branch")
    if np.any(rho.physical <= 0.0):
        raise DomainError("density must be strictly positive pointwise")
    r = np.abs(resample(rho, grid, oversample * grid.n_collocation))
    bohm = _fine_d(np.sqrt(r), 2) / np.sqrt(r)
    i_direct = 2.0 * _quad(_fine_d(r ** (alpha - 1.0) * _fine_d(r, 1), 1) * bohm)
    half = r ** (0.5 * alpha)
    i_closed = (4.0 * (4.0 - 3.0 * alpha) / (3.0 * alpha**3)
                * _quad(r ** (-alpha) * _fine_d(half, 1) ** 4)
                + 4.0 / alpha**2 * _quad(_fine_d(half, 2) ** 2))
    return abs(i_direct - i_closed)


def functional_inequality_margin(f: RealField, grid: TorusGrid,
                                 oversample: int = 8) -> float:
    """(9/16) int (f'')^2 - int |d sqrt(f)/dx|^4; nonnegative for positive f in H^2."""
    if np.any(f.physical <= 0.0):
        raise DomainError("field must be strictly positive pointwise")
    vals = resample(f, grid, oversample * grid.n_collocation)
    if np.any(vals <= 0.0):
        raise DomainError("field must stay positive on the oversampled grid")
    lhs = 9.0 / 16.0 * _quad(_fine_d(vals, 2) ** 2)
    rhs = _quad(_fine_d(np.sqrt(vals), 1) ** 4)
    return lhs - rhs


def nonneg_combination_check(rho: RealField, alpha: float, grid: TorusGrid,
                             oversample: int = 4) -> float:
    """Lower bound for the quantum dissipation pair: 16(3-2a)/(9a^3) * quartic integral.

    Combines the quartic slot with the second-order slot bounded below through
    the 9/16 inequality (applied to rho^(alpha/2)). Nonnegative exactly for
    alpha in (0, 3/2]; outside that range the signed value is returned without
    assertion.
    """
    if alpha <= 0.0:
        raise DomainError("alpha must be positive")
    r = np.abs(resample(rho, grid, oversample * grid.n_collocation))
    quartic = _quad(r ** (-alpha) * _fine_d(r ** (0.5 * alpha), 1) ** 4)
    value = 16.0 * (3.0 - 2.0 * alpha) / (9.0 * alpha**3) * quartic
    if alpha <= 1.5 and value < -1e-10:
        raise DomainError(
            f"nonnegative combination violated for alpha={alpha}: {value:.3e}"
        )
    return value


def regularity_budget(state: State, params: ModelParams, grid: TorusGrid) -> float:
    """Composite budget monitor: ||psi||^2_{H^{s+1}} + ||u||^2_{H^s} at the monitor order."""
    s = params.monitor_order
    return hs_norm(state.psi, s + 1, grid) ** 2 + hs_norm(state.u, s, grid) ** 2


def min_density(state: State, grid: TorusGrid, oversample: int = 8) -> float:
    psi_min = float(np.min(resample(state.psi, grid, oversample * grid.n_collocation)))
    return float(np.exp(psi_min))


def compute_record(state: State, params: ModelParams, grid: TorusGrid,
                   beta: float = 1.0, oversample: int = QUAD_OVERSAMPLE,
                   w2inf_psi: float | None = None,
                   w2inf_u: float | None = None) -> MonitorRecord:
    """Evaluate every monitored functional on one state."""
    s = params.monitor_order
    rho_min = min_density(state, grid)
    if w2inf_psi is None:
        w2inf_psi = w2inf_norm(state.psi, grid)
    if w2inf_u is None:
        w2inf_u = w2inf_norm(state.u, grid)
    return MonitorRecord(
        time=state.time,
        mass=mass(state, grid, oversample),
        energy=energy(state, params, grid, oversample),
        energy_dissipation_rate=energy_dissipation_rate(state, params, grid, oversample),
        bd_entropy=bd_entropy(state, params, grid, oversample),
        bd_terms=bd_dissipation_terms(state, params, grid, oversample),
        min_rho=rho_min,
        inv_rho_beta_norm=rho_min ** (-beta),
        hs_norms=(hs_norm(state.psi, s + 1, grid), hs_norm(state.u, s, grid)),
        w2inf_norms=(w2inf_psi, w2inf_u),
    )


@dataclass(frozen=True)
class VacuumSummary:
    """Ensemble vacuum statistics in the sense of the no-vacuum proposition."""

    min_rho: float
    max_inv_rho_beta: float
    beta: float
    n_paths: int
    global_regularity_regime: bool


def vacuum_statistics(record_series: Iterable[Sequence[MonitorRecord]],
                      beta: float = 1.0,
                      global_regularity_regime: bool = True) -> VacuumSummary:
    """Ensemble minimum over time of min_rho and maximum of the 1/rho^beta norm."""
    min_rho = np.inf
    max_inv = 0.0
    n_paths = 0
    for series in record_series:
        if not series:
            continue
        n_paths += 1
        path_min = min(r.min_rho for r in series)
        min_rho = min(min_rho, path_min)
        max_inv = max(max_inv, path_min ** (-beta))
    if n_paths == 0:
        raise DomainError("vacuum statistics need at least one record series")
    return VacuumSummary(min_rho=float(min_rho), max_inv_rho_beta=float(max_inv),
                         beta=beta, n_paths=n_paths,
                         global_regularity_regime=global_regularity_regime)
