"""Monte Carlo benchmark harness: metrics, experiment runner, CSV output.

A benchmark run simulates one trajectory per realization, filters it with
the configured estimator, and records a scalar tracking metric plus the
filter's wall-clock time.  Realization r always consumes the rng stream
derived from (seed, r), so results are independent of execution order and
of how many realizations run alongside.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .akkf import AkkfConfig, FilterDivergedError, filter_sequence
from .baselines import (
    DegenerateWeightsError,
    PfState,
    UkfState,
    gpf_step,
    pf_init,
    pf_step,
    ukf_step,
)
from .kernels import GaussianBelief, KernelSpec, SingularMatrixError
from .models import SimulationDivergedError, build_model, simulate

SCENARIOS = ("ungm", "bot-cv", "bot-ct")
FILTERS = ("akkf-quadratic", "akkf-quartic", "akkf-gaussian", "pf", "gpf", "ukf")

RUN_HEADER = ["scenario", "filter", "particles", "realization", "metric", "runtime_s", "diverged"]
SUMMARY_HEADER = [
    "scenario",
    "filter",
    "particles",
    "metric_mean",
    "metric_std",
    "diverged_count",
    "runtime_mean_s",
]


@dataclass(frozen=True)
class ScenarioConfig:
    """One benchmark cell: scenario, filter, sizes, seeds, ridge settings."""

    scenario: str
    filter: str
    M: int
    realizations: int
    seed: int
    lam: float = 1e-3
    kappa: float = 1e-3
    horizon: int | None = None

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.filter not in FILTERS:
            raise ValueError(f"unknown filter {self.filter!r}")
        if self.realizations < 1:
            raise ValueError("realizations must be at least 1")
        minimum = 2 if self.filter.startswith("akkf") else 1
        if self.M < minimum:
            raise ValueError(f"{self.filter} needs at least {minimum} particles")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be at least 1")


@dataclass
class RunRecord:
    """Outcome of one realization."""

    realization: int
    estimates: np.ndarray | None
    metric: float
    runtime_s: float
    diverged: bool


@dataclass(frozen=True)
class MetricsSummary:
    """Aggregate over realizations; metric moments skip diverged runs."""

    metric_mean: float
    metric_std: float
    diverged_count: int
    runtime_mean_s: float


def mse(truth: np.ndarray, est: np.ndarray) -> float:
    """Mean squared error over a scalar state sequence."""
    truth = np.asarray(truth, dtype=float).ravel()
    est = np.asarray(est, dtype=float).ravel()
    if truth.shape != est.shape:
        raise ValueError("sequences must have equal length")
    return float(np.mean((truth - est) ** 2))


def lmse(truth: np.ndarray, est: np.ndarray) -> float:
    """Natural log of the mean Euclidean position error.

    Inputs are 2 x N position sequences.  A zero mean error returns the
    -inf sentinel.
    """
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    est = np.atleast_2d(np.asarray(est, dtype=float))
    if truth.shape != est.shape:
        raise ValueError("sequences must have equal shape")
    errors = np.sqrt(((truth - est) ** 2).sum(axis=0))
    with np.errstate(divide="ignore"):
        return float(np.log(errors.mean()))


# Per-scenario kernel constants.  Observation bandwidths are fixed on each
# scenario's observation scale (bearings span about +-pi, ungm observations
# span tens); a per-step median bandwidth shrinks whenever the observation
# particles bunch up and locks the filter into overconfidence.
_STATE_C = {"ungm": 1.0, "bot-cv": 0.5, "bot-ct": 0.5}
_OBS_SIGMA = {"ungm": 7.0, "bot-cv": 1.0, "bot-ct": 1.0}


def _akkf_config(filter_name: str, cfg: ScenarioConfig) -> AkkfConfig:
    kind = filter_name.split("-", 1)[1]
    return AkkfConfig(
        state_kernel=KernelSpec(kind, c=_STATE_C[cfg.scenario]),
        obs_kernel=KernelSpec("gaussian", sigma=_OBS_SIGMA[cfg.scenario]),
        M=cfg.M,
        lambda_tilde=cfg.lam,
        kappa=cfg.kappa,
    )


def run_filter(cfg: ScenarioConfig, model, observations: np.ndarray, rng) -> np.ndarray:
    """Run the configured filter over an observation matrix.

    Returns d_x x N per-step state estimates (belief means for the
    Gaussian-belief filters, weighted means for the particle filter).
    """
    horizon = observations.shape[1]
    name = cfg.filter
    if name.startswith("akkf"):
        return filter_sequence(model, _akkf_config(name, cfg), observations, rng)
    estimates = np.empty((model.state_dim, horizon))
    if name == "pf":
        state = pf_init(model, cfg.M, rng)
        for n in range(horizon):
            state, estimates[:, n] = pf_step(state, observations[:, n], model, rng)
    elif name == "gpf":
        belief = GaussianBelief(model.prior_mean, model.prior_cov)
        for n in range(horizon):
            belief = gpf_step(belief, observations[:, n], model, cfg.M, rng, n + 1)
            estimates[:, n] = belief.mean
    elif name == "ukf":
        state = UkfState(GaussianBelief(model.prior_mean, model.prior_cov))
        for n in range(horizon):
            state = ukf_step(state, observations[:, n], model)
            estimates[:, n] = state.belief.mean
    else:
        raise ValueError(f"unknown filter {name!r}")
    return estimates


def scenario_metric(scenario: str, truth_states: np.ndarray, estimates: np.ndarray) -> float:
    """MSE on the scalar state for ungm, position LMSE for the BOT scenarios."""
    if scenario == "ungm":
        return mse(truth_states[0], estimates[0])
    return lmse(truth_states[[0, 2]], estimates[[0, 2]])


def realization_rng(seed: int, r: int) -> np.random.Generator:
    """The rng stream owned by realization r under a base seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(r,)))


def run_one(cfg: ScenarioConfig, r: int) -> RunRecord:
    """Simulate and filter realization r; divergence is recorded, not raised.

    The recorded runtime covers the filter only, not the simulation.
    """
    rng = realization_rng(cfg.seed, r)
    model = build_model(cfg.scenario, cfg.horizon)
    horizon = cfg.horizon if cfg.horizon is not None else model.default_horizon
    try:
        trajectory = simulate(model, horizon, rng)
    except SimulationDivergedError:
        return RunRecord(r, None, float("nan"), 0.0, True)
    start = time.perf_counter()
    try:
        estimates = run_filter(cfg, model, trajectory.observations, rng)
        runtime = time.perf_counter() - start
        metric = scenario_metric(cfg.scenario, trajectory.states, estimates)
    except (FilterDivergedError, DegenerateWeightsError, SingularMatrixError):
        return RunRecord(r, None, float("nan"), time.perf_counter() - start, True)
    diverged = bool(np.isnan(metric) or metric == float("inf") or not np.isfinite(estimates).all())
    return RunRecord(r, estimates, metric, runtime, diverged)


def summarize(records: list[RunRecord]) -> MetricsSummary:
    """Metric mean/std over non-diverged runs; runtime mean over all runs."""
    metrics = [rec.metric for rec in records if not rec.diverged]
    if metrics:
        mean = float(np.mean(metrics))
        std = float(np.std(metrics, ddof=1)) if len(metrics) > 1 else 0.0
    else:
        mean = float("nan")
        std = float("nan")
    runtime = float(np.mean([rec.runtime_s for rec in records]))
    diverged = sum(rec.diverged for rec in records)
    return MetricsSummary(mean, std, diverged, runtime)


def run_mc(cfg: ScenarioConfig, workers: int = 1) -> tuple[list[RunRecord], MetricsSummary]:
    """Run all realizations of one config, optionally across processes.

    Aggregation is ordered by realization index, so the output does not
    depend on the worker count or completion order.
    """
    indices = range(cfg.realizations)
    if workers <= 1:
        records = [run_one(cfg, r) for r in indices]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(partial(run_one, cfg), indices))
    return records, summarize(records)


def sweep(
    base: ScenarioConfig,
    particle_grid: list[int],
    filters: list[str],
    workers: int = 1,
) -> list[tuple[ScenarioConfig, MetricsSummary]]:
    """Cross-product of filters and particle counts, one summary per cell.

    Rows come back ordered by (filter, M) ascending.  Every cell reuses the
    base seed, so each row matches an individually executed run_mc.
    """
    if not particle_grid or not filters:
        raise ValueError("particle grid and filter list must be nonempty")
    rows = []
    for name in sorted(filters):
        for m in sorted(particle_grid):
            cfg = ScenarioConfig(
                scenario=base.scenario,
                filter=name,
                M=m,
                realizations=base.realizations,
                seed=base.seed,
                lam=base.lam,
                kappa=base.kappa,
                horizon=base.horizon,
            )
            _, summary = run_mc(cfg, workers=workers)
            rows.append((cfg, summary))
    return rows


def write_run_csv(path, cfg: ScenarioConfig, records: list[RunRecord]) -> None:
    """Per-realization rows under the fixed header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUN_HEADER)
        for rec in records:
            writer.writerow(
                [
                    cfg.scenario,
                    cfg.filter,
                    cfg.M,
                    rec.realization,
                    repr(rec.metric),
                    repr(rec.runtime_s),
                    int(rec.diverged),
                ]
            )


def read_run_csv(path) -> list[RunRecord]:
    """Read rows written by write_run_csv; estimates are not persisted."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(
                RunRecord(
                    realization=int(row["realization"]),
                    estimates=None,
                    metric=float(row["metric"]),
                    runtime_s=float(row["runtime_s"]),
                    diverged=bool(int(row["diverged"])),
                )
            )
    return records


def write_summary_csv(path, rows: list[tuple[ScenarioConfig, MetricsSummary]]) -> None:
    """One row per (filter, particle count) cell under the fixed header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for cfg, summary in rows:
            writer.writerow(
                [
                    cfg.scenario,
                    cfg.filter,
                    cfg.M,
                    repr(summary.metric_mean),
                    repr(summary.metric_std),
                    summary.diverged_count,
                    repr(summary.runtime_mean_s),
                ]
            )
