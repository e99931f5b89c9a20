"""Superpositional amplitude measurement models.

The sensor reports one intensity per resolution cell and never thresholds:
each target contributes a feature vector h(x) to every cell (and a matching
noise feature, stored as the diagonal of R(x)), contributions from distinct
targets add, and the summed features pass through an outer mean map m(.)
and covariance map Sigma(.) describing the per-cell amplitude statistics.
The filters only touch models through that interface, so swapping the cell
statistics (Rician radar grid, scalar Rayleigh power, plain linear-Gaussian)
never touches filter code.

The Rician moments need the confluent hypergeometric function M(a, b, x) at
a = +/-1/2 and strongly negative x; a compiled kernel below evaluates it to
~1e-13 relative accuracy via a positive-term power series (Kahan-compensated,
after the standard e^x M(b-a, b, -x) transformation for x < 0) and an
asymptotic expansion beyond ``SERIES_LIMIT``.
"""

from __future__ import annotations

import abc
import math

import numba
import numpy as np

# Largest |x| handled by the power series; beyond it the asymptotic
# expansion is both cheaper and accurate to ~1e-13.
SERIES_LIMIT = 30.0

_SERIES_BUDGET = 500
_ASYMPTOTIC_BUDGET = 120


@numba.vectorize(["float64(float64, float64, float64)"], nopython=True, cache=True)
def _kummer_kernel(a, b, x):  # pragma: no cover - exercised through kummer_m
    if x != x:
        return math.nan
    if x == 0.0:
        return 1.0
    if x >= -SERIES_LIMIT:
        if x < 0.0:
            # Kummer transformation: every series term becomes positive, so
            # the summation is free of cancellation.
            alpha = b - a
            y = -x
        else:
            alpha = a
            y = x
        term = 1.0
        total = 1.0
        comp = 0.0
        converged = False
        for n in range(_SERIES_BUDGET):
            term *= (alpha + n) * y / ((b + n) * (n + 1.0))
            delta = term - comp
            new_total = total + delta
            comp = (new_total - total) - delta
            total = new_total
            if abs(term) <= 1e-17 * abs(total):
                converged = True
                break
        if not converged:
            return math.nan
        return math.exp(x) * total if x < 0.0 else total
    # x << 0: asymptotic expansion, truncated at its smallest term.
    z = -x
    prefactor = math.gamma(b) / math.gamma(b - a) * z ** (-a)
    term = 1.0
    total = 1.0
    comp = 0.0
    prev_mag = 1.0
    for n in range(_ASYMPTOTIC_BUDGET):
        term *= (a + n) * (1.0 + a - b + n) / ((n + 1.0) * z)
        if abs(term) >= prev_mag:
            break
        prev_mag = abs(term)
        delta = term - comp
        new_total = total + delta
        comp = (new_total - total) - delta
        total = new_total
        if abs(term) <= 1e-17 * abs(total):
            break
    return prefactor * total


def _is_nonpositive_integer(value: float) -> bool:
    return value <= 0.0 and value == round(value)


def kummer_m(a: float, b: float, x):
    """Confluent hypergeometric function M(a, b, x) (Kummer's function).

    Accurate to better than 1e-10 relative over the domain the amplitude
    models exercise (a = +/-1/2, b in {1, 2}, x <= 0, |x| up to several
    hundred); scalar or ndarray ``x``.

    Raises:
        ValueError: b (or, in the asymptotic regime, b - a) is a nonpositive
            integer.
        ArithmeticError: the series failed to converge within its budget.
    """
    a = float(a)
    b = float(b)
    if _is_nonpositive_integer(b):
        raise ValueError(f"b = {b} is a nonpositive integer")
    arr = np.asarray(x, dtype=float)
    if np.any(arr < -SERIES_LIMIT) and _is_nonpositive_integer(b - a):
        raise ValueError(f"b - a = {b - a} unsupported in the asymptotic regime")
    out = _kummer_kernel(a, b, arr)
    bad = np.isnan(out) & ~np.isnan(arr)
    if np.any(bad):
        raise ArithmeticError("hypergeometric series exhausted its iteration budget")
    if np.ndim(x) == 0:
        return float(out)
    return out


def rician_mean(level, noise_sigma: float):
    """Mean Rician amplitude for line-of-sight level(s) ``level``.

    For level 0 this is the Rayleigh mean noise_sigma * sqrt(pi/2); for large
    levels it approaches sqrt(level^2 + noise_sigma^2).
    """
    lam = np.asarray(level, dtype=float)
    arg = -(lam * lam) / (2.0 * noise_sigma**2)
    out = noise_sigma * math.sqrt(math.pi / 2.0) * kummer_m(-0.5, 1.0, arg)
    return float(out) if np.ndim(level) == 0 else out


def rician_variance(level, noise_sigma: float):
    """Variance of a Rician amplitude; strictly positive for all levels."""
    lam = np.asarray(level, dtype=float)
    mean = rician_mean(lam, noise_sigma)
    out = 2.0 * noise_sigma**2 + lam * lam - np.square(mean)
    return float(out) if np.ndim(level) == 0 else out


def rician_mean_jacobian(level, noise_sigma: float):
    """Derivative of the Rician mean with respect to the level, elementwise.

    Uses d/dx M(a, b, x) = (a/b) M(a+1, b+1, x); zero at level 0, approaching
    one for levels far above the noise floor.
    """
    lam = np.asarray(level, dtype=float)
    arg = -(lam * lam) / (2.0 * noise_sigma**2)
    out = math.sqrt(math.pi / 2.0) / (2.0 * noise_sigma) * lam * kummer_m(0.5, 2.0, arg)
    return float(out) if np.ndim(level) == 0 else out


def sample_rician(level, noise_sigma: float, rng: np.random.Generator):
    """Draw Rician amplitudes |level + sigma*n1 + i*sigma*n2| elementwise."""
    lam = np.asarray(level, dtype=float)
    in_phase = lam + noise_sigma * rng.standard_normal(lam.shape)
    quadrature = noise_sigma * rng.standard_normal(lam.shape)
    return np.hypot(in_phase, quadrature)


def rayleigh_moments(mean_power):
    """Mean and variance of a Rayleigh amplitude with mean power ``mean_power``."""
    s = np.asarray(mean_power, dtype=float)
    if np.any(s < 0.0):
        raise ValueError("mean power must be nonnegative")
    mean = np.sqrt(math.pi * s / 4.0)
    var = (4.0 - math.pi) / 4.0 * s
    if np.ndim(mean_power) == 0:
        return float(mean), float(var)
    return mean, var


class SuperpositionalModel(abc.ABC):
    """Interface for sensors whose per-target features add across targets.

    A model exposes per-target features ``h`` (dimension ``feature_dim``) and
    noise features (the diagonal of R(x), same dimension), plus the outer
    maps acting on summed features: measurement mean ``mean_map``, covariance
    ``cov_map`` and the mean's Jacobian.  Models whose outer covariance and
    Jacobian are diagonal set ``is_diagonal`` and additionally provide the
    ``*_diag`` forms, which the filters use as a fast path.
    """

    is_diagonal = False

    @property
    @abc.abstractmethod
    def meas_dim(self) -> int:
        """Dimension of a measurement vector."""

    @property
    @abc.abstractmethod
    def feature_dim(self) -> int:
        """Dimension of the additive feature vectors."""

    @abc.abstractmethod
    def h(self, x: np.ndarray) -> np.ndarray:
        """Feature contribution of one target with state x, shape (F,)."""

    def h_batch(self, states: np.ndarray) -> np.ndarray:
        """Features for a batch of states, shape (N, F)."""
        return np.stack([self.h(s) for s in np.atleast_2d(states)])

    @abc.abstractmethod
    def noise_features(self, x: np.ndarray) -> np.ndarray:
        """Noise-feature contribution (diagonal convention), shape (F,)."""

    def noise_features_batch(self, states: np.ndarray) -> np.ndarray:
        return np.stack([self.noise_features(s) for s in np.atleast_2d(states)])

    @abc.abstractmethod
    def mean_map(self, summed: np.ndarray) -> np.ndarray:
        """Measurement mean given summed features; broadcasts elementwise maps."""

    @abc.abstractmethod
    def cov_map(self, summed_noise: np.ndarray) -> np.ndarray:
        """Measurement covariance matrix given summed noise features."""

    def cov_map_diag(self, summed_noise: np.ndarray) -> np.ndarray:
        """Diagonal of cov_map; only for models with ``is_diagonal``."""
        raise NotImplementedError

    @abc.abstractmethod
    def mean_jacobian(self, summed: np.ndarray) -> np.ndarray:
        """Jacobian of mean_map at the summed features, shape (meas, F)."""

    def mean_jacobian_diag(self, summed: np.ndarray) -> np.ndarray:
        """Diagonal of mean_jacobian; only for models with ``is_diagonal``."""
        raise NotImplementedError

    @abc.abstractmethod
    def sample(
        self, summed: np.ndarray, summed_noise: np.ndarray, rng: np.random.Generator
    ) -> np.ndarray:
        """Draw one measurement vector given summed features."""


def grid_cell_centers(extent: tuple[float, float], cell_width: float) -> np.ndarray:
    """Row-major cell centres tiling a rectangle centred on the origin.

    Args:
        extent: full (width, height) of the surveillance area.
        cell_width: side length of the square cells; must tile the extent.

    Returns:
        Array of shape (M, 2) with one (x, y) centre per cell.
    """
    counts = []
    for side in extent:
        n = side / cell_width
        if abs(n - round(n)) > 1e-9:
            raise ValueError(f"extent {side} is not a multiple of cell width {cell_width}")
        counts.append(int(round(n)))
    nx, ny = counts
    xs = (np.arange(nx) + 0.5) * cell_width - extent[0] / 2.0
    ys = (np.arange(ny) + 0.5) * cell_width - extent[1] / 2.0
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    return np.column_stack([gx.ravel(), gy.ravel()])


class RicianGridModel(SuperpositionalModel):
    """Radar intensity grid with Rician per-cell amplitude statistics.

    A target at position p illuminates cell j with a Gaussian point-spread
    level peak * exp(-(cx-px)^2/(2 sx^2) - (cy-py)^2/(2 sy^2)); levels add
    across targets and the cell amplitude is Rician about the summed level.
    Noise features coincide with the levels, so h and the noise features are
    the same map.

    Args:
        cell_centers: (M, 2) cell centre coordinates.
        noise_sigma: per-cell in-phase/quadrature noise sigma.
        peak: PSF peak level of a target centred on a cell.
        psf_sigma: (sigma_x, sigma_y) PSF widths.
        position_idx: indices of the planar position inside the state vector.
    """

    is_diagonal = True

    def __init__(
        self,
        cell_centers: np.ndarray,
        noise_sigma: float,
        peak: float,
        psf_sigma: tuple[float, float],
        position_idx: tuple[int, int] = (0, 2),
    ):
        self.cell_centers = np.atleast_2d(np.asarray(cell_centers, dtype=float))
        if self.cell_centers.shape[1] != 2:
            raise ValueError("cell centres must be (M, 2)")
        self.noise_sigma = float(noise_sigma)
        self.peak = float(peak)
        self.psf_sigma = (float(psf_sigma[0]), float(psf_sigma[1]))
        self.position_idx = tuple(position_idx)

    @property
    def meas_dim(self) -> int:
        return self.cell_centers.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.cell_centers.shape[0]

    def h(self, x: np.ndarray) -> np.ndarray:
        return self.h_batch(np.asarray(x, dtype=float)[None, :])[0]

    def h_batch(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        px = states[:, self.position_idx[0]][:, None]
        py = states[:, self.position_idx[1]][:, None]
        sx, sy = self.psf_sigma
        dx = self.cell_centers[None, :, 0] - px
        dy = self.cell_centers[None, :, 1] - py
        return self.peak * np.exp(-(dx * dx) / (2 * sx**2) - (dy * dy) / (2 * sy**2))

    def noise_features(self, x: np.ndarray) -> np.ndarray:
        return self.h(x)

    def noise_features_batch(self, states: np.ndarray) -> np.ndarray:
        return self.h_batch(states)

    def mean_map(self, summed: np.ndarray) -> np.ndarray:
        return rician_mean(summed, self.noise_sigma)

    def cov_map_diag(self, summed_noise: np.ndarray) -> np.ndarray:
        return rician_variance(summed_noise, self.noise_sigma)

    def cov_map(self, summed_noise: np.ndarray) -> np.ndarray:
        return np.diag(self.cov_map_diag(summed_noise))

    def mean_jacobian_diag(self, summed: np.ndarray) -> np.ndarray:
        return rician_mean_jacobian(summed, self.noise_sigma)

    def mean_jacobian(self, summed: np.ndarray) -> np.ndarray:
        return np.diag(self.mean_jacobian_diag(summed))

    def sample(self, summed, summed_noise, rng: np.random.Generator) -> np.ndarray:
        return sample_rician(summed, self.noise_sigma, rng)


def psf_return(x: np.ndarray, cell, model: RicianGridModel) -> float:
    """Point-spread level a target with state x deposits in one cell.

    ``cell`` is either a cell index or an explicit (x, y) centre.
    """
    if np.ndim(cell) == 0:
        center = model.cell_centers[int(cell)]
    else:
        center = np.asarray(cell, dtype=float)
    x = np.asarray(x, dtype=float)
    dx = center[0] - x[model.position_idx[0]]
    dy = center[1] - x[model.position_idx[1]]
    sx, sy = model.psf_sigma
    return float(model.peak * math.exp(-(dx * dx) / (2 * sx**2) - (dy * dy) / (2 * sy**2)))


class RayleighAmplitudeModel(SuperpositionalModel):
    """Scalar Rayleigh power sensor (test model).

    The summed feature is the mean received power s, the amplitude follows
    p(z) = (2 z / s) exp(-z^2 / s).  The mean map's Jacobian is singular at
    s = 0, so this model is never evaluated against an empty target set.

    Args:
        power_fn: callable mapping a state vector to its mean-power feature.
    """

    is_diagonal = True

    def __init__(self, power_fn):
        self.power_fn = power_fn

    @property
    def meas_dim(self) -> int:
        return 1

    @property
    def feature_dim(self) -> int:
        return 1

    def h(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.power_fn(x), dtype=float))

    def noise_features(self, x: np.ndarray) -> np.ndarray:
        return self.h(x)

    def mean_map(self, summed: np.ndarray) -> np.ndarray:
        return np.sqrt(math.pi * np.asarray(summed, dtype=float) / 4.0)

    def cov_map_diag(self, summed_noise: np.ndarray) -> np.ndarray:
        return (4.0 - math.pi) / 4.0 * np.asarray(summed_noise, dtype=float)

    def cov_map(self, summed_noise: np.ndarray) -> np.ndarray:
        return np.atleast_2d(self.cov_map_diag(summed_noise))

    def mean_jacobian_diag(self, summed: np.ndarray) -> np.ndarray:
        s = np.asarray(summed, dtype=float)
        if np.any(s <= 0.0):
            raise ValueError("Rayleigh mean Jacobian undefined at zero power")
        return math.sqrt(math.pi) / (4.0 * np.sqrt(s))

    def mean_jacobian(self, summed: np.ndarray) -> np.ndarray:
        return np.atleast_2d(self.mean_jacobian_diag(summed))

    def sample(self, summed, summed_noise, rng: np.random.Generator) -> np.ndarray:
        s = np.atleast_1d(np.asarray(summed, dtype=float))
        return rng.rayleigh(scale=np.sqrt(s / 2.0))


class LinearGaussianModel(SuperpositionalModel):
    """Affine features under an identity mean map with constant noise.

    The degenerate member of the family: measurement = sum of H x + offset
    across targets plus N(0, noise_cov) noise.  Updates against it reduce to
    plain Kalman algebra, which makes it the reference model for exactness
    tests.

    Args:
        gain: feature matrix H, shape (m, d).
        offset: per-target affine offset, shape (m,).
        noise_cov: constant measurement noise covariance, shape (m, m).
    """

    is_diagonal = False

    def __init__(self, gain: np.ndarray, offset: np.ndarray, noise_cov: np.ndarray):
        self.gain = np.atleast_2d(np.asarray(gain, dtype=float))
        self.offset = np.atleast_1d(np.asarray(offset, dtype=float))
        self.noise_cov = np.atleast_2d(np.asarray(noise_cov, dtype=float))
        m = self.gain.shape[0]
        if self.offset.shape != (m,) or self.noise_cov.shape != (m, m):
            raise ValueError("inconsistent gain/offset/noise shapes")
        self._noise_chol = np.linalg.cholesky(
            self.noise_cov + 1e-15 * np.trace(self.noise_cov) * np.eye(m)
        )

    @property
    def meas_dim(self) -> int:
        return self.gain.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.gain.shape[0]

    def h(self, x: np.ndarray) -> np.ndarray:
        return self.gain @ np.asarray(x, dtype=float) + self.offset

    def h_batch(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        return states @ self.gain.T + self.offset

    def noise_features(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(self.meas_dim)

    def noise_features_batch(self, states: np.ndarray) -> np.ndarray:
        return np.zeros((np.atleast_2d(states).shape[0], self.meas_dim))

    def mean_map(self, summed: np.ndarray) -> np.ndarray:
        return np.asarray(summed, dtype=float)

    def cov_map(self, summed_noise: np.ndarray) -> np.ndarray:
        return self.noise_cov

    def mean_jacobian(self, summed: np.ndarray) -> np.ndarray:
        return np.eye(self.meas_dim)

    def sample(self, summed, summed_noise, rng: np.random.Generator) -> np.ndarray:
        s = np.atleast_1d(np.asarray(summed, dtype=float))
        return s + self._noise_chol @ rng.standard_normal(self.meas_dim)
