"""Monte Carlo orchestration: independent paths, moments, stopping-time sweeps.

Each path gets its own seed lineage derived from (master_seed, path_index),
so paths are independent, embarrassingly parallel, and individually
replayable. The merge works on per-path summaries keyed by path index and is
therefore independent of completion order.

A radius sweep replays the same Brownian path for every threshold: since the
cut-off is inactive until the smallest threshold is reached, trajectories for
different radii coincide up to their own stopping times, which can all be
read off one run's per-step norm trace.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .functionals import MonitorRecord, VacuumSummary, vacuum_statistics
from .integrator import MonitorSpec, StepConfig, first_hit_times, simulate_path
from .model import ModelParams, State
from .noise import NoiseModel, derive_path_seed
from .spectral import TorusGrid

MOMENT_FUNCTIONALS = (
    "mass", "energy", "bd_entropy", "energy_dissipation_rate",
    "hs_psi", "hs_u", "w2inf_psi", "w2inf_u",
)

VALID_MOMENT_ORDERS = (1, 2, 3, 4)


class EnsembleConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EnsembleConfig:
    n_paths: int
    master_seed: int
    moment_orders: tuple[int, ...] = (1, 2)
    r_sweep: tuple[float, ...] | None = None
    output_stride: int = 1

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise EnsembleConfigError("n_paths must be at least 1")
        if any(p not in VALID_MOMENT_ORDERS for p in self.moment_orders):
            raise EnsembleConfigError(f"moment orders must lie in {VALID_MOMENT_ORDERS}")
        if self.output_stride < 1:
            raise EnsembleConfigError("output_stride must be positive")
        if self.r_sweep is not None:
            if len(self.r_sweep) == 0 or any(r <= 0 for r in self.r_sweep):
                raise EnsembleConfigError("r_sweep radii must be positive")
            object.__setattr__(self, "r_sweep", tuple(sorted(self.r_sweep)))


@dataclass(frozen=True)
class PathSummary:
    """Order-independent reduction payload for one path."""

    path_index: int
    path_seed: int
    event_kind: str
    event_time: float
    sup_values: dict[str, float]
    min_rho: float
    hit_times: tuple[float | None, ...]


@dataclass(frozen=True)
class StoppingRow:
    radius: float
    fraction: float
    mean_stopping_time: float | None
    n_stopped: int
    n_paths: int


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    stderr: float | None


@dataclass(frozen=True)
class EnsembleSummary:
    n_paths: int
    master_seed: int
    moments: dict[str, dict[int, MomentEstimate]]
    stopping: tuple[StoppingRow, ...]
    blowup_fraction: float
    vacuum: VacuumSummary | None
    degenerate: bool
    path_events: tuple[tuple[int, int, str, float], ...]  # (index, seed, kind, time)


def _sup_values(records: Sequence[MonitorRecord]) -> dict[str, float]:
    return {
        "mass": max(r.mass for r in records),
        "energy": max(r.energy for r in records),
        "bd_entropy": max(r.bd_entropy for r in records),
        "energy_dissipation_rate": max(r.energy_dissipation_rate for r in records),
        "hs_psi": max(r.hs_norms[0] for r in records),
        "hs_u": max(r.hs_norms[1] for r in records),
        "w2inf_psi": max(r.w2inf_norms[0] for r in records),
        "w2inf_u": max(r.w2inf_norms[1] for r in records),
    }


def jackknife_moment(values: np.ndarray, order: int) -> MomentEstimate:
    """Sample mean of values**order with leave-one-out (jackknife) stderr."""
    powered = np.asarray(values, dtype=float) ** order
    n = powered.shape[0]
    est = float(np.mean(powered))
    if n < 2:
        return MomentEstimate(value=est, stderr=None)
    total = np.sum(powered)
    loo = (total - powered) / (n - 1)
    se = float(np.sqrt((n - 1) / n * np.sum((loo - np.mean(loo)) ** 2)))
    return MomentEstimate(value=est, stderr=se)


def estimate_moments(sup_values: Sequence[float], order: int) -> MomentEstimate:
    """Monte Carlo estimator of E[(sup-over-time functional)^p]."""
    if order not in VALID_MOMENT_ORDERS:
        raise EnsembleConfigError(f"order must lie in {VALID_MOMENT_ORDERS}")
    return jackknife_moment(np.asarray(sup_values), order)


def _run_one_path(args) -> tuple[PathSummary, list[MonitorRecord]]:
    (index, master_seed, initial, step_cfg, params, noise, grid, monitor, radii) = args
    seed = derive_path_seed(master_seed, index)
    result = simulate_path(initial, step_cfg, params, noise, seed, grid, monitor)
    hits = tuple(first_hit_times(result, radii)) if radii else ()
    summary = PathSummary(
        path_index=index,
        path_seed=seed,
        event_kind=result.event.kind,
        event_time=result.event.time,
        sup_values=_sup_values(result.records),
        min_rho=min(r.min_rho for r in result.records),
        hit_times=hits,
    )
    return summary, result.records


def run_ensemble(cfg: EnsembleConfig, initial: State | Callable[[int, int], State],
                 step_cfg: StepConfig, params: ModelParams, noise: NoiseModel,
                 grid: TorusGrid, beta: float = 1.0, n_workers: int = 1,
                 keep_records: bool = False,
                 ) -> tuple[EnsembleSummary, list[list[MonitorRecord]]]:
    """Run n_paths independent trajectories and merge their summaries.

    ``initial`` is either a fixed state or a factory (path_index, path_seed)
    -> State for random initial data. With a radius sweep configured, paths
    run with cut-off radius max(r_sweep) and all smaller thresholds are read
    off the shared norm trace.
    """
    radii = list(cfg.r_sweep) if cfg.r_sweep else []
    if radii:
        params = replace(params, cutoff_radius=max(radii))
    monitor = MonitorSpec(stride=cfg.output_stride, beta=beta)

    def make_initial(index: int) -> State:
        if callable(initial):
            return initial(index, derive_path_seed(cfg.master_seed, index))
        return initial

    jobs = [(i, cfg.master_seed, make_initial(i), step_cfg, params, noise, grid,
             monitor, radii) for i in range(cfg.n_paths)]
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            outputs = list(pool.map(_run_one_path, jobs))
    else:
        outputs = [_run_one_path(j) for j in jobs]

    summaries = [o[0] for o in outputs]
    record_series = [o[1] for o in outputs]
    merged = merge_summaries(summaries, cfg, params, radii, record_series, beta)
    return merged, (record_series if keep_records else [])


def merge_summaries(summaries: Sequence[PathSummary], cfg: EnsembleConfig,
                    params: ModelParams, radii: Sequence[float],
                    record_series: Sequence[Sequence[MonitorRecord]],
                    beta: float) -> EnsembleSummary:
    """Associative, order-independent reduction of per-path summaries."""
    ordered = sorted(summaries, key=lambda s: s.path_index)
    n = len(ordered)
    blowups = sum(1 for s in ordered if s.event_kind == "numerical_blowup")

    moments: dict[str, dict[int, MomentEstimate]] = {}
    usable = [s for s in ordered if s.event_kind != "numerical_blowup"]
    for name in MOMENT_FUNCTIONALS:
        vals = np.array([s.sup_values[name] for s in usable]) if usable else np.array([])
        moments[name] = {
            p: (jackknife_moment(vals, p) if vals.size else MomentEstimate(np.nan, None))
            for p in cfg.moment_orders
        }

    stopping = []
    for col, r in enumerate(radii):
        hits = [s.hit_times[col] for s in ordered]
        stopped = [t for t in hits if t is not None]
        stopping.append(StoppingRow(
            radius=float(r),
            fraction=len(stopped) / n,
            mean_stopping_time=(float(np.mean(stopped)) if stopped else None),
            n_stopped=len(stopped),
            n_paths=n,
        ))

    vacuum = None
    if any(len(s) for s in record_series):
        vacuum = vacuum_statistics(
            record_series, beta=beta,
            global_regularity_regime=params.global_regularity_regime)

    return EnsembleSummary(
        n_paths=n,
        master_seed=cfg.master_seed,
        moments=moments,
        stopping=tuple(stopping),
        blowup_fraction=blowups / n,
        vacuum=vacuum,
        degenerate=(blowups == n),
        path_events=tuple((s.path_index, s.path_seed, s.event_kind, s.event_time)
                          for s in ordered),
    )
