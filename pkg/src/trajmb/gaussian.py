"""Gaussian primitives shared by the track-before-detect filters.

Trajectory hypotheses are Gaussians over stacked state vectors, and every
filter variant in this package manipulates them through the same small set
of operations: sigma-point generation, affine-likelihood (Kalman) updates,
log-domain likelihood evaluation, Kullback-Leibler divergence for iteration
control, and conditioning of past states on an updated current state.  All
of that lives here, with no measurement-model detail.

Covariance hygiene: covariances produced here are symmetrised, and whenever
a factorisation would fail the matrix is eigenvalue-floored at a small
multiple of its trace so downstream solves stay well posed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

# Eigenvalue floor applied when clamping, as a fraction of the trace.
PSD_FLOOR = 1e-12
# Most negative eigenvalue (relative to trace) still accepted as round-off.
PSD_TOLERANCE = 1e-9

LOG_2PI = math.log(2.0 * math.pi)


class NonPsdCovarianceError(np.linalg.LinAlgError):
    """Raised when a covariance is too indefinite to repair by clamping."""


class SingularInnovationError(np.linalg.LinAlgError):
    """Raised when an innovation covariance cannot be factorised.

    Attributes:
        condition_number: 2-norm condition estimate of the offending matrix.
    """

    def __init__(self, message: str, condition_number: float):
        super().__init__(f"{message} (condition number {condition_number:.3e})")
        self.condition_number = condition_number


def symmetrize(mat: np.ndarray) -> np.ndarray:
    """Return the symmetric part (C + C^T) / 2."""
    return 0.5 * (mat + mat.T)


def clamp_psd(mat: np.ndarray) -> np.ndarray:
    """Symmetrise a covariance candidate and floor its spectrum if needed.

    A Cholesky probe keeps the common already-positive-definite case cheap;
    only on failure is the matrix eigendecomposed and its eigenvalues floored
    at ``PSD_FLOOR`` times the trace.  Matrices that are indefinite beyond
    ``PSD_TOLERANCE`` (relative to trace) are rejected: that indicates a bug
    upstream, not round-off.
    """
    sym = symmetrize(np.asarray(mat, dtype=float))
    if not np.all(np.isfinite(sym)):
        raise NonPsdCovarianceError(f"non-finite covariance:\n{sym!r}")
    if sym.size == 0:
        return sym
    try:
        np.linalg.cholesky(sym)
        return sym
    except np.linalg.LinAlgError:
        pass
    trace = float(np.trace(sym))
    eigvals, eigvecs = np.linalg.eigh(sym)
    if trace < 0.0 or eigvals[0] < -PSD_TOLERANCE * max(trace, 1.0):
        raise NonPsdCovarianceError(
            f"covariance indefinite beyond tolerance (min eig {eigvals[0]:.3e}, "
            f"trace {trace:.3e}):\n{sym!r}"
        )
    eigvals = np.maximum(eigvals, PSD_FLOOR * max(trace, 0.0))
    return symmetrize((eigvecs * eigvals) @ eigvecs.T)


@dataclass
class GaussianDensity:
    """Gaussian over a (possibly stacked) state vector.

    Args:
        mean: state vector, shape (d,).
        cov: covariance, shape (d, d); symmetrised on construction.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        d = self.mean.shape[0]
        if self.mean.ndim != 1 or self.cov.shape != (d, d):
            raise ValueError(
                f"inconsistent shapes: mean {self.mean.shape}, cov {self.cov.shape}"
            )
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.cov))):
            raise ValueError("non-finite mean or covariance")
        self.cov = symmetrize(self.cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass
class SigmaPointSet:
    """Deterministic sample set matching a Gaussian's first two moments.

    Args:
        points: sigma points, shape (m_s, d).
        weights: point weights, shape (m_s,); must sum to one.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if self.points.shape[0] != self.weights.shape[0]:
            raise ValueError("point/weight count mismatch")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {self.weights.sum()!r}, expected 1")

    def mean(self) -> np.ndarray:
        """Weighted sample mean."""
        return self.weights @ self.points

    def cov(self) -> np.ndarray:
        """Weighted sample covariance about the weighted mean."""
        diff = self.points - self.mean()
        return (diff * self.weights[:, None]).T @ diff


def draw_sigma_points(density: GaussianDensity, central_weight: float = 1.0 / 3.0) -> SigmaPointSet:
    """Draw the 2d+1 unscented sigma points of a Gaussian.

    The central point carries ``central_weight``; the remaining 2d points
    share the rest equally and sit at +/- sqrt(d / (1 - w0)) times the
    columns of the symmetric matrix square root of the covariance, so the
    set reproduces the mean and covariance exactly.

    Args:
        density: source Gaussian.
        central_weight: weight w0 of the central point, in [0, 1).

    Returns:
        SigmaPointSet with 2d+1 points.
    """
    if not 0.0 <= central_weight < 1.0:
        raise ValueError(f"central weight {central_weight} outside [0, 1)")
    d = density.dim
    trace = float(np.trace(density.cov))
    eigvals, eigvecs = np.linalg.eigh(density.cov)
    if trace < 0.0 or eigvals[0] < -PSD_TOLERANCE * max(trace, 1.0):
        raise NonPsdCovarianceError(
            f"covariance not PSD after clamping (min eig {eigvals[0]:.3e}):\n"
            f"{density.cov!r}"
        )
    eigvals = np.maximum(eigvals, PSD_FLOOR * max(trace, 0.0))
    # Symmetric square root, deliberately not Cholesky: it stays defined for
    # the rank-deficient covariances that arise right after clamping.
    sqrt_cov = (eigvecs * np.sqrt(eigvals)) @ eigvecs.T
    spread = math.sqrt(d / (1.0 - central_weight))
    offsets = spread * sqrt_cov
    points = np.empty((2 * d + 1, d))
    points[0] = density.mean
    points[1 : d + 1] = density.mean + offsets.T
    points[d + 1 :] = density.mean - offsets.T
    weights = np.full(2 * d + 1, (1.0 - central_weight) / (2 * d))
    weights[0] = central_weight
    return SigmaPointSet(points, weights)


@dataclass
class AffineLikelihood:
    """Affine-Gaussian measurement likelihood z ~ N(A x + b, Omega).

    Args:
        gain: linear map A, shape (m, d).
        offset: additive term b, shape (m,).
        noise_cov: residual covariance Omega, shape (m, m); symmetrised.
    """

    gain: np.ndarray
    offset: np.ndarray
    noise_cov: np.ndarray

    def __post_init__(self):
        self.gain = np.atleast_2d(np.asarray(self.gain, dtype=float))
        self.offset = np.atleast_1d(np.asarray(self.offset, dtype=float))
        self.noise_cov = np.atleast_2d(np.asarray(self.noise_cov, dtype=float))
        m = self.gain.shape[0]
        if self.offset.shape != (m,) or self.noise_cov.shape != (m, m):
            raise ValueError(
                f"inconsistent shapes: gain {self.gain.shape}, offset "
                f"{self.offset.shape}, noise {self.noise_cov.shape}"
            )
        self.noise_cov = symmetrize(self.noise_cov)

    def predict_measurement(self, density: GaussianDensity) -> tuple[np.ndarray, np.ndarray]:
        """Predicted measurement mean A x + b and covariance A P A^T + Omega."""
        mean = self.gain @ density.mean + self.offset
        cov = symmetrize(self.gain @ density.cov @ self.gain.T + self.noise_cov)
        return mean, cov


def kf_update(prior: GaussianDensity, lik: AffineLikelihood, z: np.ndarray) -> GaussianDensity:
    """Kalman update of a Gaussian prior with an affine likelihood.

    Args:
        prior: Gaussian prior over the state.
        lik: affine likelihood z ~ N(A x + b, Omega).
        z: observed measurement vector.

    Returns:
        Posterior Gaussian; its covariance is clamped PSD.

    Raises:
        SingularInnovationError: the innovation covariance cannot be
            factorised; the error carries its condition number.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    pred_mean, innov_cov = lik.predict_measurement(prior)
    if z.shape != pred_mean.shape:
        raise ValueError(f"measurement shape {z.shape}, expected {pred_mean.shape}")
    try:
        factor = cho_factor(innov_cov, lower=True)
    except np.linalg.LinAlgError as err:
        eigvals = np.abs(np.linalg.eigvalsh(innov_cov))
        cond = float(eigvals[-1] / eigvals[0]) if eigvals[0] > 0.0 else math.inf
        raise SingularInnovationError("singular innovation covariance", cond) from err
    cross = prior.cov @ lik.gain.T
    gain = cho_solve(factor, cross.T).T
    mean = prior.mean + gain @ (z - pred_mean)
    cov = clamp_psd(prior.cov - gain @ innov_cov @ gain.T)
    return GaussianDensity(mean, cov)


def gaussian_log_eval(z: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    """Log of a multivariate Gaussian density at z.

    Evaluated via Cholesky; a singular but PSD covariance is retried with a
    trace-scaled jitter so the result stays finite.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = symmetrize(np.atleast_2d(np.asarray(cov, dtype=float)))
    d = mean.shape[0]
    trace = max(float(np.trace(cov)), 0.0)
    factor = None
    for jitter_scale in (0.0, 1e-12, 1e-9, 1e-6):
        try:
            factor = cho_factor(cov + jitter_scale * trace * np.eye(d), lower=True)
            break
        except np.linalg.LinAlgError:
            continue
    if factor is None:
        raise NonPsdCovarianceError(f"covariance not factorisable:\n{cov!r}")
    diff = z - mean
    maha = float(diff @ cho_solve(factor, diff))
    log_det = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    return -0.5 * (d * LOG_2PI + log_det + maha)


def gaussian_eval(z: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    """Multivariate Gaussian density at z (prefer the log variant in filters)."""
    return math.exp(gaussian_log_eval(z, mean, cov))


def kld_gaussians(p: GaussianDensity, q: GaussianDensity) -> float:
    """Kullback-Leibler divergence KL(p || q) between two Gaussians.

    Args:
        p: left argument (e.g. the newest iterate).
        q: right argument; must be positive definite.

    Returns:
        Divergence in nats; +inf when p is singular.
    """
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    d = p.dim
    factor = cho_factor(q.cov, lower=True)
    log_det_q = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    sign, log_det_p = np.linalg.slogdet(p.cov)
    if sign <= 0.0:
        return math.inf
    diff = q.mean - p.mean
    trace_term = float(np.trace(cho_solve(factor, p.cov)))
    maha = float(diff @ cho_solve(factor, diff))
    return 0.5 * (trace_term + maha - d + log_det_q - log_det_p)


def condition_past_states(
    joint_prior: GaussianDensity, updated_current: GaussianDensity
) -> GaussianDensity:
    """Propagate an update of the current state back over joint past states.

    Given a joint Gaussian over (past, current) and the updated marginal of
    the current state, returns the joint with the past conditioned on that
    update through the gain G = C(past, current) P_current^-1.  The trailing
    block of the result equals ``updated_current`` exactly.

    Raises:
        np.linalg.LinAlgError: current-state prior block is singular; shrink
            the smoothing window or add jitter upstream.
    """
    n = updated_current.dim
    total = joint_prior.dim
    if total <= n:
        raise ValueError(f"joint dim {total} must exceed current dim {n}")
    past = slice(0, total - n)
    cur = slice(total - n, total)
    p_xx = joint_prior.cov[cur, cur]
    cross = joint_prior.cov[past, cur]  # C(past, current)
    try:
        factor = cho_factor(p_xx, lower=True)
    except np.linalg.LinAlgError as err:
        raise np.linalg.LinAlgError(
            "singular current-state block; shrink the smoothing window or add jitter"
        ) from err
    gain = cho_solve(factor, cross.T).T
    mean = np.concatenate(
        [
            joint_prior.mean[past] + gain @ (updated_current.mean - joint_prior.mean[cur]),
            updated_current.mean,
        ]
    )
    w_xx = updated_current.cov
    w_yy = symmetrize(
        joint_prior.cov[past, past] - gain @ (p_xx - w_xx) @ gain.T
    )
    cross_new = gain @ w_xx
    cov = np.empty((total, total))
    cov[past, past] = w_yy
    cov[past, cur] = cross_new
    cov[cur, past] = cross_new.T
    cov[cur, cur] = w_xx
    return GaussianDensity(mean, cov)
