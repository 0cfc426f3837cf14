"""Kernel evaluation, Gram matrices, ridge solves, and moment readout.

State beliefs in this package are carried as weight vectors (and weight
covariances) over particle ensembles.  This module supplies the kernel
plumbing those representations rest on: Gram matrix assembly, ridge
regularized linear solves with jitter escalation, and the extraction of
data-space means and covariances from weighted ensembles.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist, pdist

KERNEL_KINDS = ("linear", "quadratic", "quartic", "gaussian")
POLY_KINDS = ("quadratic", "quartic")


class SingularMatrixError(np.linalg.LinAlgError):
    """Ridge system stayed singular after jitter escalation."""


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its parameters.

    Parameters
    ----------
    kind : str
        One of ``linear``, ``quadratic``, ``quartic``, ``gaussian``.
    c : float
        Offset of the polynomial kernels (x.x' + c)^p, ignored otherwise.
    sigma : float or None
        Gaussian bandwidth.  None marks a bandwidth still to be resolved
        against a concrete ensemble; see :func:`resolve_bandwidth`.
    """

    kind: str
    c: float = 1.0
    sigma: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if not self.c >= 0:
            raise ValueError("polynomial offset c must be nonnegative")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("bandwidth sigma must be positive")

    @property
    def resolved(self) -> bool:
        """Whether the spec is ready for evaluation."""
        return self.kind != "gaussian" or self.sigma is not None


@dataclass(frozen=True)
class Ensemble:
    """Particle set stored column-wise: ``particles[:, i]`` is particle i."""

    particles: np.ndarray

    def __post_init__(self) -> None:
        p = np.atleast_2d(np.asarray(self.particles, dtype=float))
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("particles must form a d x M matrix with d, M >= 1")
        if not np.isfinite(p).all():
            raise ValueError("particles must be finite")
        object.__setattr__(self, "particles", p)

    @property
    def dim(self) -> int:
        return self.particles.shape[0]

    @property
    def count(self) -> int:
        return self.particles.shape[1]

    def col(self, i: int) -> np.ndarray:
        return self.particles[:, i]


@dataclass(frozen=True)
class GramMatrix:
    """Kernel Gram matrix along with the shapes of the ensembles behind it."""

    values: np.ndarray
    left_shape: tuple[int, int]
    right_shape: tuple[int, int]

    @property
    def is_square(self) -> bool:
        return self.values.shape[0] == self.values.shape[1]


@dataclass(frozen=True)
class GaussianBelief:
    """Gaussian summary of a state belief in data space."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float).ravel()
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError("cov must be d x d for a d-dimensional mean")
        if not (np.isfinite(mean).all() and np.isfinite(cov).all()):
            raise ValueError("belief moments must be finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Draw ``count`` samples as columns of a d x count matrix.

        Uses a Cholesky factor of the covariance; an exactly singular
        covariance falls back to its positive-eigenvalue subspace, leaving
        the null directions deterministic.
        """
        try:
            root = np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError:
            vals, vecs = np.linalg.eigh((self.cov + self.cov.T) / 2.0)
            root = vecs * np.sqrt(np.maximum(vals, 0.0))
        z = rng.standard_normal((self.dim, count))
        return self.mean[:, None] + root @ z


def kernel_eval(spec: KernelSpec, x: np.ndarray, x2: np.ndarray) -> float:
    """Evaluate k(x, x2) for a single pair of vectors."""
    if not spec.resolved:
        raise ValueError("gaussian bandwidth is unresolved")
    x = np.asarray(x, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x.shape != x2.shape:
        raise ValueError("inputs must share a dimension")
    if not (np.isfinite(x).all() and np.isfinite(x2).all()):
        raise ValueError("inputs must be finite")
    if spec.kind == "linear":
        return float(x @ x2)
    if spec.kind == "quadratic":
        return float((x @ x2 + spec.c) ** 2)
    if spec.kind == "quartic":
        return float((x @ x2 + spec.c) ** 4)
    diff = x - x2
    return float(np.exp(-(diff @ diff) / spec.sigma**2))


def resolve_bandwidth(spec: KernelSpec, ensemble: Ensemble) -> KernelSpec:
    """Fix a Gaussian bandwidth by the median heuristic on an ensemble.

    The bandwidth becomes the median Euclidean distance over distinct
    particle pairs; a zero median (coincident particles) falls back to
    sigma = 1.  Non-Gaussian specs and specs whose bandwidth is already
    fixed pass through unchanged.
    """
    if spec.kind != "gaussian" or spec.sigma is not None:
        return spec
    if ensemble.count < 2:
        raise ValueError("median heuristic needs at least two particles")
    med = float(np.median(pdist(ensemble.particles.T)))
    return replace(spec, sigma=med if med > 0 else 1.0)


def gram(spec: KernelSpec, A: Ensemble, B: Ensemble) -> GramMatrix:
    """Assemble the Gram matrix with entries k(A.col(i), B.col(j)).

    A Gram of an ensemble against itself is symmetrized exactly.
    """
    if not spec.resolved:
        raise ValueError("gaussian bandwidth is unresolved")
    if A.dim != B.dim:
        raise ValueError("ensembles must share the state dimension")
    if spec.kind == "gaussian":
        sq = cdist(A.particles.T, B.particles.T, "sqeuclidean")
        values = np.exp(-sq / spec.sigma**2)
    else:
        values = A.particles.T @ B.particles
        if spec.kind == "quadratic":
            values = (values + spec.c) ** 2
        elif spec.kind == "quartic":
            values = (values + spec.c) ** 4
    if A is B or (A.count == B.count and np.array_equal(A.particles, B.particles)):
        values = (values + values.T) / 2.0
    return GramMatrix(values, (A.dim, A.count), (B.dim, B.count))


def ridge_solve(K, lam: float, B: np.ndarray, name: str = "gram matrix") -> np.ndarray:
    """Solve (K + lam*I) X = B through a Cholesky factorization.

    A failed factorization is retried with a jitter of 1e-10*trace(K)/M
    added to lam, escalated tenfold up to three times, before raising
    :class:`SingularMatrixError`.
    """
    values = K.values if isinstance(K, GramMatrix) else np.asarray(K, dtype=float)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError("K must be square")
    if not lam >= 0:
        raise ValueError("ridge parameter must be nonnegative")
    B = np.asarray(B, dtype=float)
    if B.shape[0] != values.shape[0]:
        raise ValueError("B must have as many rows as K")
    m = values.shape[0]
    eye = np.eye(m)
    jitter = 1e-10 * float(np.trace(values)) / m
    for attempt in range(4):
        shift = lam if attempt == 0 else lam + jitter * 10.0 ** (attempt - 1)
        try:
            factor = cho_factor(values + shift * eye, lower=True)
            return cho_solve(factor, B)
        except np.linalg.LinAlgError:
            continue
    raise SingularMatrixError(f"{name}: ridge system singular after jitter escalation")


def psd_repair(C: np.ndarray) -> np.ndarray:
    """Project a nearly-symmetric matrix onto the PSD cone.

    Symmetrizes, clamps negative eigenvalues at zero, reassembles.  Weight
    vectors carry no sign constraint, so extracted covariances can come out
    indefinite; sampling requires PSD.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    sym = (C + C.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    if vals[0] >= 0.0:
        return sym
    repaired = (vecs * np.maximum(vals, 0.0)) @ vecs.T
    return (repaired + repaired.T) / 2.0


def extract_moments_poly(spec: KernelSpec, E: Ensemble, w: np.ndarray) -> GaussianBelief:
    """Read mean and covariance off a polynomial-kernel weighted ensemble.

    The weighted ensemble carries the moments directly: mean = sum_i w_i x_i
    and raw second moment sum_i w_i x_i x_i^T, read out without normalizing
    the weights.  The covariance is the PSD repair of the raw second moment
    minus the outer product of the mean.  Quartic ensembles use the same
    degree-two readout; higher-degree features are ignored.
    """
    if spec.kind not in POLY_KINDS:
        raise ValueError("moment readout applies to quadratic and quartic kernels")
    w = np.asarray(w, dtype=float).ravel()
    if w.size != E.count:
        raise ValueError("weights must match the particle count")
    if not np.isfinite(w).all():
        raise ValueError("weights must be finite")
    P = E.particles
    mean = P @ w
    raw = (P * w) @ P.T
    return GaussianBelief(mean, psd_repair(raw - np.outer(mean, mean)))


def project_moments(E: Ensemble, w: np.ndarray, S: np.ndarray) -> GaussianBelief:
    """Project weight-space moments into data space.

    mean = X w and cov = PSD-repair(X S X^T) over the particle matrix X.
    """
    w = np.asarray(w, dtype=float).ravel()
    if w.size != E.count:
        raise ValueError("weights must match the particle count")
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape != (E.count, E.count):
        raise ValueError("S must be M x M for an M-particle ensemble")
    P = E.particles
    return GaussianBelief(P @ w, psd_repair(P @ S @ P.T))
