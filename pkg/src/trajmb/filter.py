"""Trajectory multi-Bernoulli track-before-detect filtering.

Each potential target is a Bernoulli component over a trajectory: an
existence probability r, a distribution beta over the trajectory's end time,
and a Gaussian over the stacked states since birth.  The filter alternates
prediction (survival, state extension, birth of fresh components) with an
update against the full intensity map.

The update runs in three phases with hard barriers between them, so the
result is independent of component order and components can be processed
concurrently within a phase:

1. per-target sigma-point feature moments from the predicted densities,
2. exchange: for every target, the feature moments of all the others
   (skipped and zeroed when exchange is disabled, which reproduces the
   independent-component baseline),
3. per-target iterated posterior linearisation, existence update and
   smoothing of the in-window past states.

Storage follows an L-scan scheme: means are kept for the whole trajectory,
covariance only for the trailing window of ``l_scan`` states; earlier states
are frozen.  In all-trajectories mode a component whose live-end weight
falls below the termination threshold is marked dead and never touched
again; its earlier end-time hypotheses share the stored means as prefixes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .gaussian import (
    AffineLikelihood,
    GaussianDensity,
    clamp_psd,
    condition_past_states,
    draw_sigma_points,
    gaussian_log_eval,
    kf_update,
    kld_gaussians,
    symmetrize,
)
from .measurement import SuperpositionalModel


@dataclass
class MotionModel:
    """Linear-Gaussian single-target motion with survival.

    Args:
        transition: state transition matrix, shape (n, n).
        noise_cov: process noise covariance, shape (n, n).
        survival_prob: per-step survival probability in [0, 1].
    """

    transition: np.ndarray
    noise_cov: np.ndarray
    survival_prob: float

    def __post_init__(self):
        self.transition = np.atleast_2d(np.asarray(self.transition, dtype=float))
        self.noise_cov = np.atleast_2d(np.asarray(self.noise_cov, dtype=float))
        n = self.transition.shape[0]
        if self.transition.shape != (n, n) or self.noise_cov.shape != (n, n):
            raise ValueError("transition/noise shape mismatch")
        if not 0.0 <= self.survival_prob <= 1.0:
            raise ValueError(f"survival probability {self.survival_prob} outside [0, 1]")

    @property
    def dim(self) -> int:
        return self.transition.shape[0]


@dataclass
class BirthComponent:
    """One Bernoulli birth hypothesis (probability, state prior)."""

    prob: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if not 0.0 <= self.prob <= 1.0:
            raise ValueError(f"birth probability {self.prob} outside [0, 1]")


@dataclass
class BirthModel:
    """Multi-Bernoulli birth: a fixed list of components appended per step."""

    components: tuple[BirthComponent, ...] = ()

    def __post_init__(self):
        self.components = tuple(self.components)

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return len(self.components)


@dataclass
class FilterConfig:
    """Knobs shared by every filter variant.

    Args:
        variant: "iplf" (iterate to convergence) or "ukf" (single pass).
        exchange: feed every target the feature moments of the others;
            disabling reproduces the independent-component baseline.
        l_scan: smoothing window length; covariances never exceed
            l_scan * state_dim.
        prune_threshold: drop components whose existence falls below this.
        termination_threshold: all-trajectories mode only; live-end weight
            below this marks the component dead.
        iplf_max_iters: iteration cap for the iplf variant.
        iplf_kld_threshold: stop once consecutive posteriors are this close
            in Kullback-Leibler divergence.
        sigma_central_weight: weight of the central sigma point.
    """

    variant: str = "iplf"
    exchange: bool = True
    l_scan: int = 1
    prune_threshold: float = 0.01
    termination_threshold: float = 0.01
    iplf_max_iters: int = 20
    iplf_kld_threshold: float = 0.1
    sigma_central_weight: float = 1.0 / 3.0

    def __post_init__(self):
        if self.variant not in ("iplf", "ukf"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.l_scan < 1:
            raise ValueError("l_scan must be at least 1")
        if not 0.0 <= self.prune_threshold <= 1.0:
            raise ValueError("prune threshold outside [0, 1]")
        if not 0.0 <= self.termination_threshold <= 1.0:
            raise ValueError("termination threshold outside [0, 1]")
        if self.iplf_max_iters < 1:
            raise ValueError("need at least one update iteration")


@dataclass
class BernoulliTrajectory:
    """Bernoulli component over a single trajectory hypothesis.

    Means are stored for every state since birth; the covariance covers only
    the trailing smoothing window, so ``cov`` has shape (w*n, w*n) with
    w <= l_scan.  ``beta`` maps candidate end times to their weights and must
    sum to one; in alive mode it is always {current time: 1}.  Dead
    components (all-trajectories mode) are frozen and never modified.

    Args:
        id: unique component label, never reused.
        t_start: birth time of the trajectory.
        state_dim: dimension n of a single state.
        r: existence probability.
        beta: end-time weights {l: weight}.
        mean: stacked state means since birth, shape (n_states * n,).
        cov: covariance of the trailing window, shape (w*n, w*n).
        dead: frozen flag (all-trajectories mode).
    """

    id: int
    t_start: int
    state_dim: int
    r: float
    beta: dict[int, float]
    mean: np.ndarray
    cov: np.ndarray
    dead: bool = False

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        n = self.state_dim
        if self.mean.size % n != 0:
            raise ValueError("stacked mean not a multiple of the state dimension")
        w = self.cov.shape[0] // n
        if self.cov.shape != (w * n, w * n) or w < 1 or w > self.n_states:
            raise ValueError("window covariance inconsistent with stored means")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"existence probability {self.r} outside [0, 1]")
        total = sum(self.beta.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"end-time weights sum to {total!r}")

    @property
    def n_states(self) -> int:
        return self.mean.size // self.state_dim

    @property
    def end_time(self) -> int:
        return self.t_start + self.n_states - 1

    @property
    def window_states(self) -> int:
        return self.cov.shape[0] // self.state_dim

    @property
    def lscan_anchor(self) -> int:
        """Index of the earliest state still inside the smoothing window."""
        return self.n_states - self.window_states

    def current_density(self) -> GaussianDensity:
        """Gaussian over the newest state."""
        n = self.state_dim
        return GaussianDensity(self.mean[-n:], self.cov[-n:, -n:])

    def window_density(self) -> GaussianDensity:
        """Gaussian over the trailing smoothing window."""
        w = self.window_states * self.state_dim
        return GaussianDensity(self.mean[-w:], self.cov)

    def states_matrix(self) -> np.ndarray:
        """Stored means as an (n_states, state_dim) array."""
        return self.mean.reshape(self.n_states, self.state_dim)


@dataclass
class TmbDensity:
    """Multi-Bernoulli density over a set of trajectories.

    Args:
        components: Bernoulli components, ids unique.
        mode: "alive" (trajectories present now) or "all" (ever present).
        time: index of the last processed step.
        state_dim: dimension of a single target state.
        next_id: next unused component label.
    """

    components: list[BernoulliTrajectory] = field(default_factory=list)
    mode: str = "alive"
    time: int = 0
    state_dim: int = 4
    next_id: int = 0

    def __post_init__(self):
        if self.mode not in ("alive", "all"):
            raise ValueError(f"unknown mode {self.mode!r}")
        ids = [b.id for b in self.components]
        if len(set(ids)) != len(ids):
            raise ValueError("component ids must be unique")


@dataclass
class CorrectionMoments:
    """Feature moments of every target except the one being updated.

    Args:
        mean: expected summed features of the other targets, shape (F,).
        cov: covariance of that sum, shape (F, F).
        noise: expected summed noise features of the others, shape (F,).
    """

    mean: np.ndarray
    cov: np.ndarray
    noise: np.ndarray

    @classmethod
    def zeros(cls, feature_dim: int) -> "CorrectionMoments":
        return cls(
            np.zeros(feature_dim),
            np.zeros((feature_dim, feature_dim)),
            np.zeros(feature_dim),
        )


@dataclass
class TrajectoryEstimate:
    """Point estimate of one trajectory: label, birth time, state sequence."""

    label: int
    t_start: int
    states: np.ndarray  # (n_states, state_dim)

    @property
    def end_time(self) -> int:
        return self.t_start + self.states.shape[0] - 1


# --------------------------------------------------------------------------
# prediction
# --------------------------------------------------------------------------


def predict(
    state: TmbDensity, motion: MotionModel, birth: BirthModel, cfg: FilterConfig
) -> TmbDensity:
    """One prediction step: survival, state extension, appended births.

    Alive mode scales existence by the survival probability; all mode leaves
    existence untouched and moves end-time weight (1 - p_survival) of the
    live end onto "ended last step".  Window covariances are extended by the
    new state and truncated back to ``cfg.l_scan`` states.
    """
    k = state.time + 1
    n = state.state_dim
    trans = motion.transition
    survival = motion.survival_prob
    components = []
    for b in state.components:
        if b.dead:
            components.append(b)
            continue
        new_mean = np.concatenate([b.mean, trans @ b.mean[-n:]])
        w = b.window_states
        cov = np.empty(((w + 1) * n, (w + 1) * n))
        cov[: w * n, : w * n] = b.cov
        cross = b.cov[:, -n:] @ trans.T
        cov[: w * n, w * n :] = cross
        cov[w * n :, : w * n] = cross.T
        cov[w * n :, w * n :] = trans @ b.cov[-n:, -n:] @ trans.T + motion.noise_cov
        if w + 1 > cfg.l_scan:
            cov = cov[n:, n:]
        cov = symmetrize(cov)
        if state.mode == "alive":
            new_r = survival * b.r
            new_beta = {k: 1.0}
        else:
            new_r = b.r
            live_weight = b.beta.get(k - 1, 0.0)
            new_beta = {l: v for l, v in b.beta.items() if l <= k - 2}
            if (1.0 - survival) * live_weight > 0.0:
                new_beta[k - 1] = (1.0 - survival) * live_weight
            new_beta[k] = survival * live_weight
        components.append(replace(b, r=new_r, beta=new_beta, mean=new_mean, cov=cov))
    next_id = state.next_id
    for bc in birth:
        components.append(
            BernoulliTrajectory(
                id=next_id,
                t_start=k,
                state_dim=n,
                r=bc.prob,
                beta={k: 1.0},
                mean=bc.mean.copy(),
                cov=bc.cov.copy(),
            )
        )
        next_id += 1
    return TmbDensity(components, state.mode, k, n, next_id)


def marginalize_current(b: BernoulliTrajectory, k: int) -> tuple[float, GaussianDensity]:
    """Existence probability at time k and the Gaussian over the current state.

    The probability that the trajectory exists *and* is alive at k is
    r * beta(k); the state marginal is the trailing block of the live
    component.
    """
    if b.dead or b.end_time != k:
        raise ValueError(f"component {b.id} has no live state at time {k}")
    return b.r * b.beta.get(k, 0.0), b.current_density()


# --------------------------------------------------------------------------
# feature moments and exchange
# --------------------------------------------------------------------------


def per_target_moments(
    single: GaussianDensity, model: SuperpositionalModel, cfg: FilterConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sigma-point moments (E[h], E[h h^T], E[noise features]) of one target."""
    sp = draw_sigma_points(single, cfg.sigma_central_weight)
    feats = model.h_batch(sp.points)
    noise = model.noise_features_batch(sp.points)
    w = sp.weights
    e_h = w @ feats
    e_hh = (feats * w[:, None]).T @ feats
    e_noise = w @ noise
    return e_h, e_hh, e_noise


def _bernoulli_feature_moments(per_target, existence):
    """Scale single-target moments by existence: moments of each target's
    actual (possibly absent) feature contribution."""
    means, covs, noises = [], [], []
    for (e_h, e_hh, e_noise), r in zip(per_target, existence):
        mean = r * e_h
        covs.append(r * e_hh - np.outer(mean, mean))
        means.append(mean)
        noises.append(r * e_noise)
    return means, covs, noises


def all_correction_moments(per_target, existence) -> list[CorrectionMoments]:
    """Correction moments for every target at once (total minus own)."""
    means, covs, noises = _bernoulli_feature_moments(per_target, existence)
    total_mean = np.sum(means, axis=0)
    total_cov = np.sum(covs, axis=0)
    total_noise = np.sum(noises, axis=0)
    return [
        CorrectionMoments(total_mean - m, symmetrize(total_cov - c), total_noise - s)
        for m, c, s in zip(means, covs, noises)
    ]


def correction_moments(per_target, existence, u: int) -> CorrectionMoments:
    """Feature moments of every target except index u."""
    if not 0 <= u < len(per_target):
        raise IndexError(f"target index {u} out of range")
    return all_correction_moments(per_target, existence)[u]


def conditional_moments(
    x_u, corr: CorrectionMoments, model: SuperpositionalModel
) -> tuple[np.ndarray, np.ndarray]:
    """Measurement mean and covariance conditioned on one target's state.

    With ``x_u`` a state vector, the target is present at that state and the
    other targets enter through their correction moments; with ``x_u`` None
    the target is absent and only the correction moments remain.
    """
    if x_u is None:
        summed = corr.mean
        summed_noise = corr.noise
    else:
        summed = model.h(x_u) + corr.mean
        summed_noise = model.noise_features(x_u) + corr.noise
    mean = model.mean_map(summed)
    if model.is_diagonal:
        jac_diag = model.mean_jacobian_diag(summed)
        cov = np.diag(model.cov_map_diag(summed_noise)) + corr.cov * np.outer(
            jac_diag, jac_diag
        )
    else:
        jac = model.mean_jacobian(summed)
        cov = model.cov_map(summed_noise) + jac @ corr.cov @ jac.T
    return mean, symmetrize(cov)


# --------------------------------------------------------------------------
# linearisation and single-target update
# --------------------------------------------------------------------------


def slr_generalized(
    lin_density: GaussianDensity,
    corr: CorrectionMoments,
    model: SuperpositionalModel,
    cfg: FilterConfig,
) -> AffineLikelihood:
    """Statistical linear regression of the conditional measurement moments.

    Linearises z | x around ``lin_density`` with the other targets folded in
    through the correction moments, returning the affine likelihood
    z ~ N(A x + b, Omega) whose regression residual (including the expected
    conditional covariance) is Omega.

    Raises:
        np.linalg.LinAlgError: ``lin_density`` covariance is singular; add
            jitter or supply a proper prior.
    """
    sp = draw_sigma_points(lin_density, cfg.sigma_central_weight)
    points, weights = sp.points, sp.weights
    feats = model.h_batch(points) + corr.mean
    noises = model.noise_features_batch(points) + corr.noise
    exchange_active = bool(np.any(corr.cov))
    if model.is_diagonal:
        transformed = model.mean_map(feats)
        expected_cond = np.diag(weights @ model.cov_map_diag(noises))
        if exchange_active:
            jd = model.mean_jacobian_diag(feats)
            expected_cond = expected_cond + corr.cov * ((jd * weights[:, None]).T @ jd)
    else:
        rows = []
        expected_cond = np.zeros((model.meas_dim, model.meas_dim))
        for point_feats, point_noise, w in zip(feats, noises, weights):
            rows.append(model.mean_map(point_feats))
            expected_cond = expected_cond + w * model.cov_map(point_noise)
            if exchange_active:
                jac = model.mean_jacobian(point_feats)
                expected_cond = expected_cond + w * (jac @ corr.cov @ jac.T)
        transformed = np.stack(rows)
    e_g = weights @ transformed
    centered = transformed - e_g
    cov_g = (centered * weights[:, None]).T @ centered
    cross = ((points - lin_density.mean) * weights[:, None]).T @ centered
    try:
        gain = np.linalg.solve(lin_density.cov, cross).T
    except np.linalg.LinAlgError as err:
        raise np.linalg.LinAlgError(
            "singular linearisation covariance; add jitter to the density"
        ) from err
    offset = e_g - gain @ lin_density.mean
    omega = clamp_psd(cov_g + expected_cond - gain @ lin_density.cov @ gain.T)
    return AffineLikelihood(gain, offset, omega)


def iplf_update(
    prior_single: GaussianDensity,
    corr: CorrectionMoments,
    model: SuperpositionalModel,
    z: np.ndarray,
    cfg: FilterConfig,
) -> tuple[GaussianDensity, AffineLikelihood]:
    """Iterated posterior-linearisation update of one target's current state.

    Repeats {linearise at the current best posterior, Kalman-update the
    prior with the new affine likelihood} until the posterior stops moving
    (KL divergence below the threshold) or the iteration cap is hit.  The
    "ukf" variant is the same path capped at a single iteration.

    Returns:
        (posterior, final affine likelihood).
    """
    max_iters = 1 if cfg.variant == "ukf" else cfg.iplf_max_iters
    lin = prior_single
    posterior = None
    lik = None
    for _ in range(max_iters):
        try:
            new_lik = slr_generalized(lin, corr, model, cfg)
            new_posterior = kf_update(prior_single, new_lik, z)
        except np.linalg.LinAlgError:
            if posterior is None:
                raise
            break  # diverged: keep the previous iterate
        converged = (
            posterior is not None
            and kld_gaussians(new_posterior, posterior) < cfg.iplf_kld_threshold
        )
        posterior, lik = new_posterior, new_lik
        if converged:
            break
        lin = new_posterior
    return posterior, lik


def existence_likelihoods(
    prior_single: GaussianDensity,
    lik: AffineLikelihood,
    corr: CorrectionMoments,
    model: SuperpositionalModel,
    z: np.ndarray,
) -> tuple[float, float]:
    """Log-likelihoods of the measurement with and without this target.

    Both are full measurement-space Gaussian evaluations and are returned in
    the log domain; their difference drives the existence update.
    """
    pred_mean, pred_cov = lik.predict_measurement(prior_single)
    log_p_exist = gaussian_log_eval(z, pred_mean, pred_cov)
    empty_mean, empty_cov = conditional_moments(None, corr, model)
    log_p_empty = gaussian_log_eval(z, empty_mean, empty_cov)
    return log_p_exist, log_p_empty


# --------------------------------------------------------------------------
# Bernoulli updates
# --------------------------------------------------------------------------


def _logit(r: float) -> float:
    if r >= 1.0:
        return math.inf
    if r <= 0.0:
        return -math.inf
    return math.log(r) - math.log1p(-r)


def _sigmoid(t: float) -> float:
    if t == math.inf:
        return 1.0
    if t == -math.inf:
        return 0.0
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def _smooth_window(
    b: BernoulliTrajectory, posterior_single: GaussianDensity
) -> tuple[np.ndarray, np.ndarray]:
    """Replace the current state by its posterior, conditioning the in-window
    past states on it; frozen means outside the window stay put."""
    n = b.state_dim
    if b.window_states == 1:
        new_mean = np.concatenate([b.mean[:-n], posterior_single.mean])
        return new_mean, posterior_single.cov
    smoothed = condition_past_states(b.window_density(), posterior_single)
    w = b.window_states * n
    new_mean = np.concatenate([b.mean[:-w], smoothed.mean])
    return new_mean, smoothed.cov


def update_bernoulli_alive(
    b: BernoulliTrajectory,
    log_p_exist: float,
    log_p_empty: float,
    posterior_single: GaussianDensity,
    cfg: FilterConfig,
) -> BernoulliTrajectory:
    """Existence and state update of an alive-mode component."""
    log_ratio = log_p_exist - log_p_empty
    new_r = _sigmoid(_logit(b.r) + log_ratio)
    new_mean, new_cov = _smooth_window(b, posterior_single)
    return replace(b, r=new_r, mean=new_mean, cov=new_cov)


def update_bernoulli_all(
    b: BernoulliTrajectory,
    log_p_exist: float,
    log_p_empty: float,
    posterior_single: GaussianDensity,
    cfg: FilterConfig,
    k: int,
) -> BernoulliTrajectory:
    """Existence, end-time and state update of an all-trajectories component.

    Only the live (end time k) hypothesis sees the measurement: its weight
    is scaled by the existence likelihood, every earlier end time by the
    empty-set likelihood, and only the live state is updated.  With all
    weight on the live end this reduces exactly to the alive-mode update.
    """
    log_diff = log_p_exist - log_p_empty
    beta_k = b.beta.get(k, 0.0)
    rest = sum(v for l, v in b.beta.items() if l != k)
    if rest == 0.0:
        log_ratio = log_diff
        new_beta = dict(b.beta)
    elif beta_k == 0.0:
        log_ratio = math.log(rest)
        new_beta = {l: v / rest for l, v in b.beta.items() if l != k}
    else:
        log_ratio = np.logaddexp(math.log(beta_k) + log_diff, math.log(rest))
        new_beta = {
            l: (
                math.exp(math.log(beta_k) + log_diff - log_ratio)
                if l == k
                else v * math.exp(-log_ratio)
            )
            for l, v in b.beta.items()
        }
        total = sum(new_beta.values())
        new_beta = {l: v / total for l, v in new_beta.items()}
    new_r = _sigmoid(_logit(b.r) + log_ratio)
    new_mean, new_cov = _smooth_window(b, posterior_single)
    return replace(b, r=new_r, beta=new_beta, mean=new_mean, cov=new_cov)


# --------------------------------------------------------------------------
# full update, pruning, estimation
# --------------------------------------------------------------------------


def update(
    state: TmbDensity, z: np.ndarray, model: SuperpositionalModel, cfg: FilterConfig
) -> TmbDensity:
    """Measurement update of every live component against the intensity map.

    Runs the three phases described in the module docstring; dead components
    pass through untouched.
    """
    k = state.time
    z = np.asarray(z, dtype=float)
    live = [(i, b) for i, b in enumerate(state.components) if not b.dead]
    singles = []
    weights = []
    moments = []
    for _, b in live:
        weight, single = marginalize_current(b, k)
        singles.append(single)
        weights.append(weight)
        moments.append(per_target_moments(single, model, cfg))
    # phase barrier: every per-target moment above is computed from the
    # predicted densities before any component is updated below.
    shared_log_empty = None
    if cfg.exchange:
        corrs = all_correction_moments(moments, weights)
    else:
        corrs = [CorrectionMoments.zeros(model.feature_dim) for _ in live]
        if live:
            empty_mean, empty_cov = conditional_moments(None, corrs[0], model)
            shared_log_empty = gaussian_log_eval(z, empty_mean, empty_cov)
    new_components = list(state.components)
    for (i, b), single, corr in zip(live, singles, corrs):
        posterior, lik = iplf_update(single, corr, model, z, cfg)
        if shared_log_empty is None:
            log_p_exist, log_p_empty = existence_likelihoods(single, lik, corr, model, z)
        else:
            pred_mean, pred_cov = lik.predict_measurement(single)
            log_p_exist = gaussian_log_eval(z, pred_mean, pred_cov)
            log_p_empty = shared_log_empty
        if state.mode == "alive":
            new_components[i] = update_bernoulli_alive(
                b, log_p_exist, log_p_empty, posterior, cfg
            )
        else:
            new_components[i] = update_bernoulli_all(
                b, log_p_exist, log_p_empty, posterior, cfg, k
            )
    return TmbDensity(new_components, state.mode, k, state.state_dim, state.next_id)


def prune_and_terminate(state: TmbDensity, cfg: FilterConfig) -> TmbDensity:
    """Drop weak components; in all mode, freeze ended trajectories.

    Components with existence strictly below the prune threshold are
    removed.  In all-trajectories mode a surviving live component whose
    live-end weight is below the termination threshold has that weight
    zeroed, the remaining end-time weights renormalised, and is marked dead.
    """
    k = state.time
    kept = []
    for b in state.components:
        if b.r < cfg.prune_threshold:
            continue
        if state.mode == "all" and not b.dead:
            if b.beta.get(k, 0.0) < cfg.termination_threshold:
                rest = {l: v for l, v in b.beta.items() if l != k}
                total = sum(rest.values())
                if total <= 0.0:
                    continue  # no credible end time left at all
                new_beta = {l: v / total for l, v in rest.items()}
                b = replace(b, beta=new_beta, dead=True)
        kept.append(b)
    return TmbDensity(kept, state.mode, k, state.state_dim, state.next_id)


def estimate(state: TmbDensity, cfg: FilterConfig) -> list[TrajectoryEstimate]:
    """Trajectory estimates: components with existence above the threshold.

    Alive mode reports the full stored mean sequence; all mode cuts each
    trajectory at its highest-weight end time (ties resolved toward the
    later end).
    """
    out = []
    for b in state.components:
        if not b.r > cfg.prune_threshold:
            continue
        states = b.states_matrix()
        if state.mode == "all":
            best = max(b.beta, key=lambda l: (b.beta[l], l))
            states = states[: best - b.t_start + 1]
        out.append(TrajectoryEstimate(b.id, b.t_start, states.copy()))
    return out


# --------------------------------------------------------------------------
# serialisation and orchestration
# --------------------------------------------------------------------------


def tmb_to_dict(state: TmbDensity) -> dict:
    """JSON-ready snapshot of a filter state."""
    return {
        "mode": state.mode,
        "time": state.time,
        "state_dim": state.state_dim,
        "next_id": state.next_id,
        "components": [
            {
                "id": b.id,
                "t_start": b.t_start,
                "r": b.r,
                "dead": b.dead,
                "beta": {str(l): v for l, v in b.beta.items()},
                "mean": b.mean.tolist(),
                "cov": b.cov.tolist(),
            }
            for b in state.components
        ],
    }


def tmb_from_dict(data: dict) -> TmbDensity:
    """Inverse of :func:`tmb_to_dict`."""
    components = [
        BernoulliTrajectory(
            id=int(c["id"]),
            t_start=int(c["t_start"]),
            state_dim=int(data["state_dim"]),
            r=float(c["r"]),
            beta={int(l): float(v) for l, v in c["beta"].items()},
            mean=np.asarray(c["mean"], dtype=float),
            cov=np.asarray(c["cov"], dtype=float),
            dead=bool(c["dead"]),
        )
        for c in data["components"]
    ]
    return TmbDensity(
        components,
        data["mode"],
        int(data["time"]),
        int(data["state_dim"]),
        int(data["next_id"]),
    )


class TmbFilter:
    """Step-loop convenience wrapper around the functional core.

    Args:
        model: superpositional measurement model.
        motion: single-target motion model.
        birth: birth model appended at every prediction.
        cfg: filter configuration.
        mode: "alive" or "all" trajectory semantics.
    """

    def __init__(
        self,
        model: SuperpositionalModel,
        motion: MotionModel,
        birth: BirthModel,
        cfg: FilterConfig,
        mode: str = "alive",
    ):
        self.model = model
        self.motion = motion
        self.birth = birth
        self.cfg = cfg
        self.mode = mode

    def initial_state(self, start_time: int = 0) -> TmbDensity:
        """Empty density just before the first measurement."""
        return TmbDensity([], self.mode, start_time, self.motion.dim, 0)

    def step(self, state: TmbDensity, z: np.ndarray) -> TmbDensity:
        """Predict, update against one intensity map, prune."""
        predicted = predict(state, self.motion, self.birth, self.cfg)
        updated = update(predicted, z, self.model, self.cfg)
        return prune_and_terminate(updated, self.cfg)

    def estimate(self, state: TmbDensity) -> list[TrajectoryEstimate]:
        """Trajectory estimates of the current state."""
        return estimate(state, self.cfg)
