"""Truncated cylindrical Wiener forcing with a concrete coefficient family.

The default multiplicative family is

    F_k(x, rho, u) = a_k * sin(2*pi*k*x) * tanh(u) * rho / (1 + rho),
    a_k = base_amplitude * k**(-amplitude_decay),

which vanishes at (rho, u) = (0, 0), is bounded with bounded derivatives,
and satisfies sum_k |F_k| <= (sum_k a_k) * (1 + |u|). The additive variant
("off": coupling to the state switched off) uses F_k(x) = a_k * sin(2*pi*k*x).

Increments are a pure function of (path_seed, step_index): each step keys a
counter-based Philox stream, so any step of any path replays independently
of call order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, State, cutoff_phi, w2inf_norm
from .spectral import RealField, TorusGrid, project_spectral

SHAPES = ("trig_density_weighted", "off")

# counter-domain tags so independent draws never share a Philox block
_DOMAIN_INCREMENT = 0
_DOMAIN_INITIAL = 1


class NoiseConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    """Coefficient family {F_k, k=1..k_modes} with summable amplitude bounds."""

    k_modes: int = 16
    amplitude_decay: float = 6.0
    base_amplitude: float = 0.05
    shape: str = "trig_density_weighted"
    amplitudes: np.ndarray = field(init=False, repr=False)
    derivative_bounds: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.k_modes < 1:
            raise NoiseConfigError("k_modes must be positive")
        if self.amplitude_decay <= 1.0:
            raise NoiseConfigError("amplitude_decay must exceed 1 for summability")
        if self.base_amplitude < 0.0:
            raise NoiseConfigError("base_amplitude must be nonnegative")
        if self.shape not in SHAPES:
            raise NoiseConfigError(f"shape must be one of {SHAPES}")
        ks = np.arange(1, self.k_modes + 1, dtype=float)
        amps = self.base_amplitude * ks ** (-self.amplitude_decay)
        # x-derivatives of sin(2*pi*k*x) bring powers of 2*pi*k; u-derivatives
        # of tanh are bounded by 2; these are the constructed per-k constants
        bounds = 2.0 * amps * np.maximum(1.0, (2.0 * np.pi * ks) ** 3)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "derivative_bounds", bounds)

    def tail_bound(self) -> float:
        """Discarded amplitude mass sum_{k>K} a_k, bounded by the integral test."""
        d = self.amplitude_decay
        return self.base_amplitude * self.k_modes ** (1.0 - d) / (d - 1.0)

    def amplitude_sum(self) -> float:
        return float(np.sum(self.amplitudes))

    def coefficient_fields(self, x: np.ndarray, rho: np.ndarray, u: np.ndarray) -> np.ndarray:
        """F_k(x, rho(x), u(x)) for all k, shape (k_modes, len(x))."""
        ks = np.arange(1, self.k_modes + 1, dtype=float)
        waves = np.sin(2.0 * np.pi * np.outer(ks, x))
        if self.shape == "off":
            return self.amplitudes[:, None] * waves
        envelope = np.tanh(u) * rho / (1.0 + rho)
        return self.amplitudes[:, None] * waves * envelope[None, :]

    def verify_bounds(self, n_samples: int = 10000, seed: int = 0) -> dict:
        """Sampled check of the structural hypotheses on a random (x, rho, u) lattice.

        Checks |F_k| <= a_k, first three partials of (x, rho, u) within the
        constructed constants, F_k(.,0,0) = 0, and the linear growth bound
        sum_k |F_k| <= (sum a_k)(1 + |u|). Returns the measured margins;
        raises NoiseConfigError on violation.
        """
        rng = np.random.default_rng(seed)
        h = 1e-4
        x = rng.uniform(0.0, 1.0, n_samples)
        rho = rng.uniform(4.0 * h, 10.0, n_samples)  # keep FD stencils inside rho >= 0
        u = rng.uniform(-10.0, 10.0, n_samples)

        f = self.coefficient_fields(x, rho, u)
        amp_ok = np.max(np.abs(f), axis=1) <= self.amplitudes + 1e-15
        vanish = float(np.max(np.abs(self.coefficient_fields(x, np.zeros(1), np.zeros(1)))))
        growth_lhs = float(np.max(np.sum(np.abs(f), axis=0) / (1.0 + np.abs(u))))
        growth_c = self.amplitude_sum()

        stencils = {1: [(-1, -0.5), (1, 0.5)],
                    2: [(-1, 1.0), (0, -2.0), (1, 1.0)],
                    3: [(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)]}
        worst_partial = np.zeros(self.k_modes)
        for axis in range(3):
            args = (x, rho, u)
            for order, offsets in stencils.items():
                acc = np.zeros((self.k_modes, n_samples))
                for step_mult, weight in offsets:
                    shifted = [a.copy() for a in args]
                    shifted[axis] = shifted[axis] + step_mult * h
                    acc += weight * self.coefficient_fields(*shifted)
                deriv = acc / h**order
                worst_partial = np.maximum(worst_partial, np.max(np.abs(deriv), axis=1))
        partial_ok = worst_partial <= self.derivative_bounds * (1.0 + 1e-3) + 1e-9

        report = {
            "amplitude_bound_ok": bool(np.all(amp_ok)),
            "vanishes_at_rest": vanish,
            "growth_constant": growth_c,
            "growth_measured": growth_lhs,
            "growth_ok": growth_lhs <= growth_c + 1e-12,
            "partials_ok": bool(np.all(partial_ok)),
            "worst_partial_over_bound": float(np.max(worst_partial / self.derivative_bounds)),
            "tail_bound": self.tail_bound(),
        }
        if not (report["amplitude_bound_ok"] and report["growth_ok"] and report["partials_ok"]):
            raise NoiseConfigError(f"coefficient family violates its bounds: {report}")
        if vanish > 1e-14:
            raise NoiseConfigError("coefficient family does not vanish at (rho,u)=(0,0)")
        return report


@dataclass(frozen=True)
class WienerIncrement:
    """One step's Gaussian increments dW_k ~ N(0, dt), replayable from the token."""

    dW: np.ndarray
    step_index: int
    seed_lineage: str


def derive_path_seed(master_seed: int, path_index: int) -> int:
    """Stable per-path seed from the master seed (recorded in manifests)."""
    ss = np.random.SeedSequence([int(master_seed), int(path_index)])
    return int(ss.generate_state(1, np.uint64)[0])


def _philox(path_seed: int, domain: int, step_index: int) -> np.random.Generator:
    bg = np.random.Philox(counter=[0, domain, step_index, 0],
                          key=[np.uint64(path_seed), np.uint64(0x9E3779B97F4A7C15)])
    return np.random.Generator(bg)


def sample_increment(path_seed: int, step_index: int, dt: float,
                     model: NoiseModel) -> WienerIncrement:
    """Gaussian increments for one step; pure in (path_seed, step_index)."""
    if dt <= 0.0:
        raise NoiseConfigError(f"dt must be positive, got {dt}")
    gen = _philox(path_seed, _DOMAIN_INCREMENT, step_index)
    dW = gen.standard_normal(model.k_modes) * np.sqrt(dt)
    return WienerIncrement(dW=dW, step_index=step_index,
                           seed_lineage=f"philox:{path_seed}:{step_index}")


def initial_data_generator(path_seed: int) -> np.random.Generator:
    """Per-path stream for random initial-data perturbations."""
    return _philox(path_seed, _DOMAIN_INITIAL, 0)


def forcing_field(state: State, increment: WienerIncrement, model: NoiseModel,
                  params: ModelParams, grid: TorusGrid,
                  phi_u: float | None = None) -> RealField:
    """phi(|u|) * sum_k F_k(x, rho, u) dW_k, projected onto the Galerkin band."""
    if phi_u is None:
        phi_u = (cutoff_phi(w2inf_norm(state.u, grid), params.cutoff_radius)
                 if params.enable_cutoff else 1.0)
    coeffs = model.coefficient_fields(grid.x, state.rho, state.u.physical)
    values = phi_u * (increment.dW @ coeffs)
    spec = project_spectral(np.fft.rfft(values) / grid.n_collocation, grid)
    return RealField.from_spectral(spec, grid)
