"""Pseudo-spectral Galerkin simulator for the 1D stochastic quantum
Navier-Stokes system in log-density variables, with a Monte Carlo harness
and a verification suite for its conserved/dissipated functionals."""

from .spectral import (
    RealField,
    TorusGrid,
    dealias_product,
    derivative,
    hs_norm,
    l2_norm,
    project,
    transform_forward,
    transform_inverse,
)
from .model import (
    ModelParams,
    NumericalBlowupError,
    RhsPair,
    State,
    cutoff_phi,
    deterministic_rhs,
    quantum_identity_residual,
    rhs_psi,
    rhs_u_deterministic,
    rhs_u_terms,
    w2inf_norm,
)
from .noise import (
    NoiseModel,
    WienerIncrement,
    derive_path_seed,
    forcing_field,
    sample_increment,
)
from .integrator import (
    MonitorSpec,
    PathResult,
    StepConfig,
    StoppingEvent,
    simulate_path,
    step,
    strong_convergence_order,
)
from .functionals import (
    MonitorRecord,
    bd_dissipation_terms,
    bd_entropy,
    bd_pressure_identity_residual,
    bd_quantum_identity_residual,
    compute_record,
    effective_velocity,
    energy,
    energy_dissipation_rate,
    functional_inequality_margin,
    mass,
    nonneg_combination_check,
    vacuum_statistics,
)
from .ensemble import EnsembleConfig, EnsembleSummary, estimate_moments, run_ensemble
from .oracle import OracleReport, dense_quadrature, reference_trajectory

__version__ = "0.1.0"
