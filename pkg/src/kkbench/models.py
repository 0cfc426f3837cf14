"""Benchmark state-space models and trajectory simulation.

Three systems are provided: a univariate nonlinear growth model with a
strongly bimodal posterior, and two bearings-only tracking setups, one with
constant-velocity motion and one with a coordinated turn whose rate follows
a random walk.  All models expose the same callable bundle so the filters
stay model-agnostic.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .kernels import psd_repair

LOG_2PI = math.log(2.0 * math.pi)

# Turn rates below this magnitude use the Taylor-limit transition entries;
# the exact form divides by omega.
CT_OMEGA_EPS = 1e-6


class SimulationDivergedError(RuntimeError):
    """A simulated state stopped being finite."""

    def __init__(self, time_index: int):
        super().__init__(f"simulation diverged at step {time_index}")
        self.time_index = time_index


@dataclass(frozen=True)
class StateSpaceModel:
    """Discrete-time state-space model.

    ``process(x, noise, n)`` advances one step, where ``n`` is the 1-based
    index of the step being produced, and ``measure(x, noise)`` forms an
    observation.  Noise vectors come from the paired samplers; for models
    with state-dependent noise the sampler returns unit draws that
    ``process`` colors internally.  ``measurement_log_likelihood(y, x)``
    accepts a single state column or a d x M batch (returning a length-M
    vector) and must agree with the law of ``sample_measurement_noise``.
    ``prior_mean``/``prior_cov`` are the moments of the initial-state prior
    used by the Gaussian-belief filters.
    """

    name: str
    state_dim: int
    obs_dim: int
    process_noise_dim: int
    measurement_noise_dim: int
    process: Callable[[np.ndarray, np.ndarray, int], np.ndarray]
    measure: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sample_process_noise: Callable[..., np.ndarray]
    sample_measurement_noise: Callable[..., np.ndarray]
    measurement_log_likelihood: Callable[[float, np.ndarray], np.ndarray]
    sample_prior: Callable[[np.random.Generator], np.ndarray]
    prior_mean: np.ndarray
    prior_cov: np.ndarray
    process_noise_cov: Callable[[np.ndarray, int], np.ndarray]
    measurement_noise_cov: np.ndarray
    default_horizon: int
    wrap_residual: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class Trajectory:
    """Simulated states and observations, columns indexed n = 1..N."""

    states: np.ndarray
    observations: np.ndarray

    def __post_init__(self) -> None:
        if self.states.ndim != 2 or self.observations.ndim != 2:
            raise ValueError("states and observations must be 2-D")
        if self.states.shape[1] != self.observations.shape[1]:
            raise ValueError("states and observations must share the horizon")

    @property
    def horizon(self) -> int:
        return self.states.shape[1]


def wrap_angle(delta):
    """Wrap an angle difference into (-pi, pi]."""
    return math.pi - np.mod(math.pi - np.asarray(delta), 2.0 * math.pi)


def _wrap_float(delta: float) -> float:
    return math.pi - (math.pi - delta) % (2.0 * math.pi)


def bearing(xi, eta) -> float:
    """Four-quadrant bearing of a planar position."""
    if xi == 0.0 and eta == 0.0:
        raise ValueError("bearing undefined at the origin")
    return math.atan2(eta, xi)


def ungm(horizon: int = 100) -> StateSpaceModel:
    """Univariate nonlinear growth model.

    x_n = 0.5 x + 25 x/(1+x^2) + 8 cos(1.2 (n-1)) + u,  y = x^2/20 + v,
    with unit-variance process and measurement noise and the deterministic
    initial state x_0 = 0.1.
    """

    def process(x, noise, n):
        x0 = x[0]
        drift = 0.5 * x0 + 25.0 * x0 / (1.0 + x0 * x0) + 8.0 * math.cos(1.2 * (n - 1))
        return np.array([drift + noise[0]])

    def measure(x, noise):
        return np.array([x[0] * x[0] / 20.0 + noise[0]])

    def sample_process_noise(rng, count=None):
        return rng.standard_normal((1,) if count is None else (1, count))

    def log_likelihood(y, x):
        delta = y - x[0] * x[0] / 20.0
        return -0.5 * delta * delta - 0.5 * LOG_2PI

    return StateSpaceModel(
        name="ungm",
        state_dim=1,
        obs_dim=1,
        process_noise_dim=1,
        measurement_noise_dim=1,
        process=process,
        measure=measure,
        sample_process_noise=sample_process_noise,
        sample_measurement_noise=sample_process_noise,
        measurement_log_likelihood=log_likelihood,
        sample_prior=lambda rng: np.array([0.1]),
        prior_mean=np.array([0.1]),
        prior_cov=np.zeros((1, 1)),
        process_noise_cov=lambda x, n: np.eye(1),
        measurement_noise_cov=np.eye(1),
        default_horizon=horizon,
    )


# Constant-velocity kinematics, sampling interval 1.
CV_F = np.array(
    [
        [1.0, 1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 1.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
)
CV_G = np.array(
    [
        [0.5, 0.0],
        [1.0, 0.0],
        [0.0, 0.5],
        [0.0, 1.0],
    ]
)

BOT_PRIOR_MEAN = np.array([-0.05, 0.001, 0.7, -0.05])
# As printed: asymmetric, entry (3,4) = 1 with (4,3) = 0.  Sampling uses the
# symmetrized PSD repair of this matrix.
BOT_PRIOR_COV_RAW = np.array(
    [
        [0.1, 0.0, 0.0, 0.0],
        [0.0, 0.005, 0.0, 0.0],
        [0.0, 0.0, 0.1, 1.0],
        [0.0, 0.0, 0.0, 0.01],
    ]
)

BOT_PROCESS_STD = 1e-3
BOT_MEASUREMENT_STD = 5e-3


def _eigen_root(cov: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((cov + cov.T) / 2.0)
    return vecs * np.sqrt(np.maximum(vals, 0.0))


def _bearing_log_likelihood(sigma: float):
    norm = -math.log(sigma) - 0.5 * LOG_2PI
    inv_two_var = 0.5 / (sigma * sigma)

    def log_likelihood(y, x):
        if x.ndim == 1:
            delta = _wrap_float(y - bearing(x[0], x[2]))
            return -inv_two_var * delta * delta + norm
        delta = wrap_angle(y - np.arctan2(x[2], x[0]))
        return -inv_two_var * delta * delta + norm

    return log_likelihood


def _bearing_measure(sigma: float):
    def measure(x, noise):
        return np.array([bearing(x[0], x[2]) + noise[0]])

    return measure


def bot_cv(horizon: int = 30) -> StateSpaceModel:
    """Bearings-only tracking of a constant-velocity target.

    State [xi, xi_dot, eta, eta_dot]; the observer sits at the origin and
    measures the four-quadrant bearing plus Gaussian noise.
    """
    prior_cov = psd_repair(BOT_PRIOR_COV_RAW)
    prior_root = _eigen_root(prior_cov)
    q_cov = BOT_PROCESS_STD**2 * (CV_G @ CV_G.T)

    def process(x, noise, n):
        return CV_F @ x + CV_G @ noise

    def sample_process_noise(rng, count=None):
        shape = (2,) if count is None else (2, count)
        return BOT_PROCESS_STD * rng.standard_normal(shape)

    def sample_measurement_noise(rng, count=None):
        shape = (1,) if count is None else (1, count)
        return BOT_MEASUREMENT_STD * rng.standard_normal(shape)

    def sample_prior(rng):
        return BOT_PRIOR_MEAN + prior_root @ rng.standard_normal(4)

    return StateSpaceModel(
        name="bot-cv",
        state_dim=4,
        obs_dim=1,
        process_noise_dim=2,
        measurement_noise_dim=1,
        process=process,
        measure=_bearing_measure(BOT_MEASUREMENT_STD),
        sample_process_noise=sample_process_noise,
        sample_measurement_noise=sample_measurement_noise,
        measurement_log_likelihood=_bearing_log_likelihood(BOT_MEASUREMENT_STD),
        sample_prior=sample_prior,
        prior_mean=BOT_PRIOR_MEAN.copy(),
        prior_cov=prior_cov,
        process_noise_cov=lambda x, n: q_cov,
        measurement_noise_cov=np.array([[BOT_MEASUREMENT_STD**2]]),
        default_horizon=horizon,
        wrap_residual=wrap_angle,
    )


CT_PROCESS_STD = 1e-3
CT_RATE_STD = 1e-2
CT_RATE_PRIOR_HIGH = math.pi / 6.0


def ct_transition(omega: float, ts: float = 1.0) -> np.ndarray:
    """Coordinated-turn transition matrix for the position/velocity block.

    Below ``CT_OMEGA_EPS`` the entries switch to their omega -> 0 Taylor
    limits, which is the constant-velocity matrix.
    """
    if abs(omega) < CT_OMEGA_EPS:
        sin_w = ts
        cos_flat = 0.0
        c = 1.0
        s = 0.0
    else:
        wt = omega * ts
        c = math.cos(wt)
        s = math.sin(wt)
        sin_w = s / omega
        cos_flat = (1.0 - c) / omega
    return np.array(
        [
            [1.0, sin_w, 0.0, -cos_flat],
            [0.0, c, 0.0, -s],
            [0.0, cos_flat, 1.0, sin_w],
            [0.0, s, 0.0, c],
        ]
    )


def ct_noise_cov(omega: float, ts: float = 1.0) -> np.ndarray:
    """Unit-intensity noise covariance of the coordinated-turn block.

    Entries follow the printed omega-dependent matrix, with each entry's
    omega -> 0 limit below ``CT_OMEGA_EPS``.
    """
    if abs(omega) < CT_OMEGA_EPS:
        a3 = ts**3 / 6.0  # (wT - sin wT)/w^3
        a2 = 0.0          # (wT - sin wT)/w^2
        b2 = ts**2 / 2.0  # (1 - cos wT)/w^2
    else:
        wt = omega * ts
        lag = wt - math.sin(wt)
        a3 = lag / omega**3
        a2 = lag / omega**2
        b2 = (1.0 - math.cos(wt)) / omega**2
    return np.array(
        [
            [2.0 * a3, b2, 0.0, a2],
            [b2, ts, -a3, 0.0],
            [0.0, -a3, 2.0 * a3, b2],
            [a2, 0.0, b2, ts],
        ]
    )


def _ct_noise_root(omega: float) -> np.ndarray:
    cov = ct_noise_cov(omega)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return _eigen_root(cov)


def bot_ct(horizon: int = 30) -> StateSpaceModel:
    """Bearings-only tracking of a coordinated-turn target.

    State [xi, xi_dot, eta, eta_dot, omega].  The turn rate follows a random
    walk and collapses to a third of its value at step horizon//2.  The
    process noise sampler returns unit normals; ``process`` colors the
    position/velocity part by the omega-dependent covariance evaluated at
    the freshly updated rate.
    """
    prior_cov4 = psd_repair(BOT_PRIOR_COV_RAW)
    prior_root4 = _eigen_root(prior_cov4)
    switch_step = horizon // 2
    rate_var = CT_RATE_PRIOR_HIGH**2 / 12.0

    prior_mean = np.append(BOT_PRIOR_MEAN, CT_RATE_PRIOR_HIGH / 2.0)
    prior_cov = np.zeros((5, 5))
    prior_cov[:4, :4] = prior_cov4
    prior_cov[4, 4] = rate_var

    def process(x, noise, n):
        omega = x[4]
        base = omega / 3.0 if n == switch_step else omega
        omega_new = base + CT_RATE_STD * noise[4]
        out = np.empty(5)
        out[:4] = ct_transition(omega) @ x[:4]
        out[:4] += CT_PROCESS_STD * (_ct_noise_root(omega_new) @ noise[:4])
        out[4] = omega_new
        return out

    def sample_process_noise(rng, count=None):
        return rng.standard_normal((5,) if count is None else (5, count))

    def sample_measurement_noise(rng, count=None):
        shape = (1,) if count is None else (1, count)
        return BOT_MEASUREMENT_STD * rng.standard_normal(shape)

    def sample_prior(rng):
        pos = BOT_PRIOR_MEAN + prior_root4 @ rng.standard_normal(4)
        return np.append(pos, rng.uniform(0.0, CT_RATE_PRIOR_HIGH))

    def process_noise_cov(x, n):
        cov = np.zeros((5, 5))
        cov[:4, :4] = CT_PROCESS_STD**2 * ct_noise_cov(x[4])
        cov[4, 4] = CT_RATE_STD**2
        return cov

    return StateSpaceModel(
        name="bot-ct",
        state_dim=5,
        obs_dim=1,
        process_noise_dim=5,
        measurement_noise_dim=1,
        process=process,
        measure=_bearing_measure(BOT_MEASUREMENT_STD),
        sample_process_noise=sample_process_noise,
        sample_measurement_noise=sample_measurement_noise,
        measurement_log_likelihood=_bearing_log_likelihood(BOT_MEASUREMENT_STD),
        sample_prior=sample_prior,
        prior_mean=prior_mean,
        prior_cov=prior_cov,
        process_noise_cov=process_noise_cov,
        measurement_noise_cov=np.array([[BOT_MEASUREMENT_STD**2]]),
        default_horizon=horizon,
        wrap_residual=wrap_angle,
    )


MODEL_BUILDERS = {
    "ungm": ungm,
    "bot-cv": bot_cv,
    "bot-ct": bot_ct,
}


def build_model(name: str, horizon: int | None = None) -> StateSpaceModel:
    """Construct a benchmark model by name, optionally overriding the horizon."""
    try:
        builder = MODEL_BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}") from None
    return builder() if horizon is None else builder(horizon=horizon)


def simulate(model: StateSpaceModel, N: int, rng: np.random.Generator) -> Trajectory:
    """Draw a prior state and roll the model forward N steps."""
    if N < 1:
        raise ValueError("N must be at least 1")
    states = np.empty((model.state_dim, N))
    observations = np.empty((model.obs_dim, N))
    x = model.sample_prior(rng)
    for n in range(1, N + 1):
        u = model.sample_process_noise(rng)
        x = model.process(x, u, n)
        if not np.isfinite(x).all():
            raise SimulationDivergedError(n)
        v = model.sample_measurement_noise(rng)
        observations[:, n - 1] = model.measure(x, v)
        states[:, n - 1] = x
    return Trajectory(states, observations)


def export_trajectory_csv(trajectory: Trajectory, path) -> None:
    """Write a trajectory as CSV with header n, x1..xd, y1..yd."""
    d_x = trajectory.states.shape[0]
    d_y = trajectory.observations.shape[0]
    header = (
        ["n"]
        + [f"x{i}" for i in range(1, d_x + 1)]
        + [f"y{i}" for i in range(1, d_y + 1)]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for n in range(trajectory.horizon):
            row = [n + 1]
            row.extend(repr(float(v)) for v in trajectory.states[:, n])
            row.extend(repr(float(v)) for v in trajectory.observations[:, n])
            writer.writerow(row)


def import_trajectory_csv(path) -> Trajectory:
    """Read a trajectory written by :func:`export_trajectory_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d_x = sum(1 for name in header if name.startswith("x"))
        d_y = sum(1 for name in header if name.startswith("y"))
        states = []
        observations = []
        for row in reader:
            values = [float(v) for v in row[1:]]
            states.append(values[:d_x])
            observations.append(values[d_x:])
    return Trajectory(np.array(states).T, np.array(observations).T)
