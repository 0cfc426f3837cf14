"""Adaptive kernel Kalman filter.

The filter keeps two coupled representations of the state belief: a particle
ensemble in data space, and a weight vector plus weight covariance over that
ensemble, which together embed the belief's mean and covariance operator in
the kernel feature space.  Each step propagates the proposal particles
through the process model, performs a linear gain update against the kernel
embedding of the new observation, reads out a Gaussian belief, and redraws
proposal particles from it, re-expressing the weights in the new basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import (
    Ensemble,
    GaussianBelief,
    GramMatrix,
    KernelSpec,
    POLY_KINDS,
    SingularMatrixError,
    extract_moments_poly,
    gram,
    project_moments,
    resolve_bandwidth,
    ridge_solve,
)
from .models import StateSpaceModel


class FilterDivergedError(RuntimeError):
    """A filter produced a non-finite particle or belief."""

    def __init__(self, time_index: int, what: str = "state"):
        super().__init__(f"filter diverged at step {time_index} ({what})")
        self.time_index = time_index


@dataclass(frozen=True)
class AkkfConfig:
    """Kernel choices and ridge parameters of one filter instance.

    ``lambda_tilde`` regularizes the change-of-basis solves, ``kappa`` the
    gain solve.  ``lambda_K`` is the likelihood-operator ridge; the update
    implemented here assumes it is zero, so the field records the intended
    value and only zero is accepted.
    """

    state_kernel: KernelSpec
    obs_kernel: KernelSpec = field(default_factory=lambda: KernelSpec("gaussian"))
    M: int = 50
    lambda_tilde: float = 1e-3
    kappa: float = 1e-3
    lambda_K: float = 0.0

    def __post_init__(self) -> None:
        if self.M < 2:
            raise ValueError("M must be at least 2")
        if not self.lambda_tilde > 0:
            raise ValueError("lambda_tilde must be positive")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.lambda_K != 0.0:
            raise ValueError("nonzero lambda_K is not supported by this update")


@dataclass
class AkkfState:
    """Mutable filter state.

    ``particles`` is the current basis, ``proposal_particles`` the basis the
    next prediction propagates.  The minus/plus/tilde weight vectors and
    covariances follow the predict/update/rebasis stages of step ``n``.
    """

    config: AkkfConfig
    particles: Ensemble
    proposal_particles: Ensemble
    w_minus: np.ndarray
    w_plus: np.ndarray
    w_tilde: np.ndarray
    S_minus: np.ndarray
    S_plus: np.ndarray
    S_tilde: np.ndarray
    Gamma: np.ndarray
    n: int = 0


def gain_update(
    w_minus: np.ndarray,
    S_minus: np.ndarray,
    G_yy: np.ndarray,
    g_vec: np.ndarray,
    kappa: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Gain solve and weight-space measurement update.

    Computes Q = S_minus (G_yy S_minus + kappa I)^-1 by solving the
    transposed system instead of forming the inverse, then applies
    w_plus = w_minus + Q (g_vec - G_yy w_minus) and
    S_plus = S_minus - Q G_yy S_minus, symmetrized.
    """
    m = S_minus.shape[0]
    GS = G_yy @ S_minus
    try:
        Q = np.linalg.solve(GS.T + kappa * np.eye(m), S_minus.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("gain system: solve failed") from exc
    w_plus = w_minus + Q @ (g_vec - G_yy @ w_minus)
    S_plus = S_minus - Q @ GS
    return w_plus, (S_plus + S_plus.T) / 2.0


def _read_belief(cfg: AkkfConfig, particles: Ensemble, w: np.ndarray, S: np.ndarray) -> GaussianBelief:
    # Polynomial feature spaces carry the first two moments in the embedding
    # itself; other kernels project the weight-space moments onto particles.
    if cfg.state_kernel.kind in POLY_KINDS:
        return extract_moments_poly(cfg.state_kernel, particles, w)
    return project_moments(particles, w, S)


def _gram_scale(K: GramMatrix) -> float:
    # lambda_tilde is relative to the kernel's self-similarity scale so one
    # value works across data magnitudes; rescaling k by a constant leaves
    # (K + lambda*scale*I)^-1 K_cross unchanged.  Gaussian grams have unit
    # diagonal, so this is the identity for them.
    return float(np.mean(np.diag(K.values)))


def init(model: StateSpaceModel, cfg: AkkfConfig, rng: np.random.Generator) -> AkkfState:
    """Draw the initial ensemble from the prior with uniform weights."""
    columns = np.column_stack([model.sample_prior(rng) for _ in range(cfg.M)])
    particles = Ensemble(columns)
    w0 = np.full(cfg.M, 1.0 / cfg.M)
    S0 = np.eye(cfg.M) / cfg.M
    return AkkfState(
        config=cfg,
        particles=particles,
        proposal_particles=particles,
        w_minus=w0.copy(),
        w_plus=w0.copy(),
        w_tilde=w0.copy(),
        S_minus=S0.copy(),
        S_plus=S0.copy(),
        S_tilde=S0.copy(),
        Gamma=np.eye(cfg.M),
        n=0,
    )


def predict(state: AkkfState, model: StateSpaceModel, rng: np.random.Generator) -> AkkfState:
    """Propagate proposal particles and form the predictive weights.

    The predictive weight vector is carried over from the rebased posterior
    unchanged; the weight covariance gains the residual term
    V = (1/M) (T - I)(T - I)^T with T the ridge-smoothed identity on the
    proposal self-Gram, accounting for the finite-sample propagation error.
    """
    cfg = state.config
    n = state.n + 1
    proposals = state.proposal_particles
    m = proposals.count
    noise = model.sample_process_noise(rng, m)
    columns = np.empty((model.state_dim, m))
    for i in range(m):
        columns[:, i] = model.process(proposals.particles[:, i], noise[:, i], n)
    if not np.isfinite(columns).all():
        raise FilterDivergedError(n, "propagated particle")
    spec = resolve_bandwidth(cfg.state_kernel, proposals)
    K = gram(spec, proposals, proposals)
    T = ridge_solve(K, cfg.lambda_tilde * _gram_scale(K), K.values, name="proposal self-gram")
    residual = T - np.eye(m)
    state.particles = Ensemble(columns)
    state.w_minus = state.w_tilde.copy()
    state.S_minus = state.S_tilde + (residual @ residual.T) / m
    state.n = n
    return state


def update(state: AkkfState, y_n, model: StateSpaceModel, rng: np.random.Generator) -> AkkfState:
    """Condition the weights on one observation.

    Observation particles are generated through the measurement model with
    fresh noise draws, the observation kernel bandwidth is resolved on them,
    and the gain update runs against the kernel vector of the real
    observation.
    """
    cfg = state.config
    particles = state.particles
    m = particles.count
    noise = model.sample_measurement_noise(rng, m)
    columns = np.empty((model.obs_dim, m))
    for i in range(m):
        columns[:, i] = model.measure(particles.particles[:, i], noise[:, i])
    if not np.isfinite(columns).all():
        raise FilterDivergedError(state.n, "observation particle")
    obs = Ensemble(columns)
    spec = resolve_bandwidth(cfg.obs_kernel, obs)
    G = gram(spec, obs, obs)
    target = Ensemble(np.atleast_1d(np.asarray(y_n, dtype=float)).reshape(-1, 1))
    g_vec = gram(spec, obs, target).values[:, 0]
    state.w_plus, state.S_plus = gain_update(
        state.w_minus, state.S_minus, G.values, g_vec, cfg.kappa
    )
    return state


def estimate(state: AkkfState, cfg: AkkfConfig) -> GaussianBelief:
    """Read the posterior belief out of the updated weights."""
    return _read_belief(cfg, state.particles, state.w_plus, state.S_plus)


def propose(state: AkkfState, cfg: AkkfConfig, rng: np.random.Generator) -> AkkfState:
    """Redraw proposal particles and re-express the weights in their basis.

    Proposals are sampled from the posterior belief read-out; the basis
    change solves the ridge system between the proposal self-Gram and the
    proposal-to-current cross-Gram.
    """
    try:
        belief = _read_belief(cfg, state.particles, state.w_plus, state.S_plus)
    except ValueError as exc:
        raise FilterDivergedError(state.n, "belief moments") from exc
    proposals = Ensemble(belief.sample(rng, cfg.M))
    spec = resolve_bandwidth(cfg.state_kernel, proposals)
    K_pp = gram(spec, proposals, proposals)
    K_px = gram(spec, proposals, state.particles)
    lam = cfg.lambda_tilde * _gram_scale(K_pp)
    Gamma = ridge_solve(K_pp, lam, K_px.values, name="proposal self-gram")
    S_tilde = Gamma @ state.S_plus @ Gamma.T
    state.proposal_particles = proposals
    state.Gamma = Gamma
    state.w_tilde = Gamma @ state.w_plus
    state.S_tilde = (S_tilde + S_tilde.T) / 2.0
    return state


def step(
    state: AkkfState,
    y_n,
    model: StateSpaceModel,
    cfg: AkkfConfig,
    rng: np.random.Generator,
) -> tuple[AkkfState, GaussianBelief]:
    """One full filter cycle; returns the belief formed after the update."""
    predict(state, model, rng)
    update(state, y_n, model, rng)
    belief = estimate(state, cfg)
    propose(state, cfg, rng)
    return state, belief


def filter_sequence(
    model: StateSpaceModel,
    cfg: AkkfConfig,
    observations: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Run the filter over a d_y x N observation matrix, returning means."""
    state = init(model, cfg, rng)
    horizon = observations.shape[1]
    means = np.empty((model.state_dim, horizon))
    for n in range(horizon):
        state, belief = step(state, observations[:, n], model, cfg, rng)
        means[:, n] = belief.mean
    return means
