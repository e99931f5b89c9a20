"""Tests for the Gaussian primitive layer.

Closed-form oracles are written out inline (hand Bayes products, textbook
KLD formulas, a stacked-state joint Kalman update) so every numerical
expectation is independent of the implementation under test.
"""

import numpy as np
import pytest

from trajmb.gaussian import (
    AffineLikelihood,
    GaussianDensity,
    NonPsdCovarianceError,
    SingularInnovationError,
    clamp_psd,
    condition_past_states,
    draw_sigma_points,
    gaussian_eval,
    gaussian_log_eval,
    kf_update,
    kld_gaussians,
    symmetrize,
)


def _random_density(rng, dim, scale=1.0):
    root = rng.standard_normal((dim, dim))
    return GaussianDensity(
        rng.standard_normal(dim) * scale, root @ root.T + 0.1 * np.eye(dim)
    )


class TestSigmaPoints:
    def test_count_and_weights(self):
        """d=2 with central weight 1/3 gives 5 points, outer weights 1/6."""
        density = GaussianDensity(np.zeros(2), np.eye(2))
        points = draw_sigma_points(density, central_weight=1.0 / 3.0)
        assert points.points.shape == (5, 2)
        np.testing.assert_allclose(points.weights[0], 1.0 / 3.0)
        np.testing.assert_allclose(points.weights[1:], 1.0 / 6.0)

    def test_moment_reproduction(self):
        rng = np.random.default_rng(3)
        for dim in (1, 2, 4, 8):
            density = _random_density(rng, dim, scale=5.0)
            points = draw_sigma_points(density, central_weight=1.0 / 3.0)
            np.testing.assert_allclose(points.mean(), density.mean, atol=1e-9)
            np.testing.assert_allclose(points.cov(), density.cov, atol=1e-9)

    def test_identity_covariance_exact(self):
        density = GaussianDensity(np.zeros(2), np.eye(2))
        points = draw_sigma_points(density, central_weight=1.0 / 3.0)
        np.testing.assert_allclose(points.cov(), np.eye(2), atol=1e-12)

    def test_affine_regression_moments_exact(self):
        """Sigma-point moments of an affine map match the closed form."""
        rng = np.random.default_rng(11)
        density = _random_density(rng, 4)
        gain = rng.standard_normal((3, 4))
        offset = rng.standard_normal(3)
        points = draw_sigma_points(density, central_weight=1.0 / 3.0)
        transformed = points.points @ gain.T + offset
        w = points.weights
        mean_g = w @ transformed
        centered_x = points.points - density.mean
        centered_g = transformed - mean_g
        cov_g = (centered_g * w[:, None]).T @ centered_g
        cross = (centered_x * w[:, None]).T @ centered_g
        np.testing.assert_allclose(mean_g, gain @ density.mean + offset, atol=1e-9)
        np.testing.assert_allclose(cov_g, gain @ density.cov @ gain.T, atol=1e-9)
        np.testing.assert_allclose(cross, density.cov @ gain.T, atol=1e-9)

    def test_rejects_bad_central_weight(self):
        density = GaussianDensity(np.zeros(2), np.eye(2))
        with pytest.raises(ValueError):
            draw_sigma_points(density, central_weight=1.0)


class TestKalmanUpdate:
    def test_hand_bayes_product(self):
        """Prior N(0,1), unit-noise direct observation of 2 -> N(1, 0.5)."""
        prior = GaussianDensity(np.zeros(1), np.eye(1))
        lik = AffineLikelihood(np.eye(1), np.zeros(1), np.eye(1))
        post = kf_update(prior, lik, np.array([2.0]))
        np.testing.assert_allclose(post.mean, [1.0], atol=1e-12)
        np.testing.assert_allclose(post.cov, [[0.5]], atol=1e-12)

    def test_uninformative_measurement(self):
        rng = np.random.default_rng(5)
        prior = _random_density(rng, 3)
        lik = AffineLikelihood(np.eye(3), np.zeros(3), 1e12 * np.eye(3))
        post = kf_update(prior, lik, rng.standard_normal(3))
        assert np.max(np.abs(post.mean - prior.mean)) < 1e-6
        assert np.max(np.abs(post.cov - prior.cov)) < 1e-6

    def test_exact_measurement(self):
        prior = GaussianDensity(np.zeros(1), np.eye(1))
        lik = AffineLikelihood(np.eye(1), np.zeros(1), np.zeros((1, 1)))
        post = kf_update(prior, lik, np.array([3.0]))
        np.testing.assert_allclose(post.mean, [3.0], atol=1e-9)
        assert post.cov[0, 0] < 1e-9

    def test_posterior_never_exceeds_prior(self):
        """Posterior covariance <= prior covariance in Loewner order."""
        rng = np.random.default_rng(7)
        for _ in range(20):
            prior = _random_density(rng, 4)
            gain = rng.standard_normal((2, 4))
            noise = np.diag(rng.uniform(0.1, 2.0, size=2))
            lik = AffineLikelihood(gain, rng.standard_normal(2), noise)
            post = kf_update(prior, lik, rng.standard_normal(2))
            eigs = np.linalg.eigvalsh(prior.cov - post.cov)
            assert eigs.min() > -1e-9

    def test_singular_innovation_reports_condition(self):
        prior = GaussianDensity(np.zeros(2), np.zeros((2, 2)))
        lik = AffineLikelihood(np.eye(2), np.zeros(2), np.zeros((2, 2)))
        with pytest.raises(SingularInnovationError) as err:
            kf_update(prior, lik, np.zeros(2))
        assert err.value.condition_number is None or np.isfinite(
            err.value.condition_number
        ) or np.isinf(err.value.condition_number)


class TestGaussianEval:
    def test_standard_normal_at_mode(self):
        value = gaussian_eval(np.zeros(1), np.zeros(1), np.eye(1))
        np.testing.assert_allclose(value, 0.3989422804014327, rtol=1e-12)

    def test_unit_offset(self):
        value = gaussian_eval(np.ones(1), np.zeros(1), np.eye(1))
        np.testing.assert_allclose(value, np.exp(-0.5) / np.sqrt(2 * np.pi), rtol=1e-12)

    def test_two_dim_scaled(self):
        value = gaussian_eval(np.zeros(2), np.zeros(2), 4.0 * np.eye(2))
        np.testing.assert_allclose(value, 1.0 / (2.0 * np.pi * 4.0), rtol=1e-12)

    def test_integrates_to_one(self):
        grid = np.linspace(-8.0, 8.0, 4001)
        values = [gaussian_eval(np.array([g]), np.array([0.3]), np.eye(1)) for g in grid]
        assert abs(np.trapezoid(values, grid) - 1.0) < 1e-4

    def test_log_matches_linear(self):
        rng = np.random.default_rng(9)
        density = _random_density(rng, 3)
        z = rng.standard_normal(3)
        log_value = gaussian_log_eval(z, density.mean, density.cov)
        np.testing.assert_allclose(
            np.exp(log_value), gaussian_eval(z, density.mean, density.cov), rtol=1e-10
        )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            gaussian_eval(np.zeros(2), np.zeros(3), np.eye(3))


class TestKld:
    def test_identical_is_zero(self):
        rng = np.random.default_rng(13)
        p = _random_density(rng, 3)
        assert kld_gaussians(p, p) < 1e-12

    def test_unit_mean_shift(self):
        p = GaussianDensity(np.zeros(1), np.eye(1))
        q = GaussianDensity(np.ones(1), np.eye(1))
        np.testing.assert_allclose(kld_gaussians(p, q), 0.5, rtol=1e-12)

    def test_variance_doubling(self):
        p = GaussianDensity(np.zeros(1), np.eye(1))
        q = GaussianDensity(np.zeros(1), 2.0 * np.eye(1))
        expected = 0.5 * (np.log(2.0) + 0.5 - 1.0)
        np.testing.assert_allclose(kld_gaussians(p, q), expected, rtol=1e-12)

    def test_nonnegative(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            assert kld_gaussians(_random_density(rng, 2), _random_density(rng, 2)) >= 0.0


def _joint_kalman_oracle(mean, cov, gain, offset, noise, z):
    # plain-formula joint update; deliberately avoids the library routines
    innovation_cov = gain @ cov @ gain.T + noise
    kalman_gain = cov @ gain.T @ np.linalg.inv(innovation_cov)
    post_mean = mean + kalman_gain @ (z - gain @ mean - offset)
    post_cov = cov - kalman_gain @ innovation_cov @ kalman_gain.T
    return post_mean, post_cov


class TestConditionPastStates:
    def _random_joint(self, rng, past_dim, cur_dim):
        return _random_density(rng, past_dim + cur_dim)

    def test_no_information_is_identity(self):
        rng = np.random.default_rng(19)
        joint = self._random_joint(rng, 4, 2)
        current = GaussianDensity(joint.mean[4:], joint.cov[4:, 4:])
        out = condition_past_states(joint, current)
        np.testing.assert_allclose(out.mean, joint.mean, atol=1e-10)
        np.testing.assert_allclose(out.cov, joint.cov, atol=1e-10)

    def test_matches_joint_kalman_update(self):
        """Updating the current state then conditioning the past equals a
        Kalman update run directly on the stacked joint state."""
        rng = np.random.default_rng(23)
        for _ in range(10):
            joint = self._random_joint(rng, 4, 2)
            gain_cur = rng.standard_normal((2, 2))
            offset = rng.standard_normal(2)
            noise = np.diag(rng.uniform(0.2, 1.0, size=2))
            z = rng.standard_normal(2)
            cur_mean, cur_cov = _joint_kalman_oracle(
                joint.mean[4:], joint.cov[4:, 4:], gain_cur, offset, noise, z
            )
            out = condition_past_states(
                joint, GaussianDensity(cur_mean, cur_cov)
            )
            gain_joint = np.hstack([np.zeros((2, 4)), gain_cur])
            ref_mean, ref_cov = _joint_kalman_oracle(
                joint.mean, joint.cov, gain_joint, offset, noise, z
            )
            np.testing.assert_allclose(out.mean, ref_mean, atol=1e-8)
            np.testing.assert_allclose(out.cov, ref_cov, atol=1e-8)

    def test_uncorrelated_past_unchanged(self):
        rng = np.random.default_rng(29)
        past = _random_density(rng, 3)
        cur = _random_density(rng, 2)
        joint_cov = np.zeros((5, 5))
        joint_cov[:3, :3] = past.cov
        joint_cov[3:, 3:] = cur.cov
        joint = GaussianDensity(np.concatenate([past.mean, cur.mean]), joint_cov)
        updated = GaussianDensity(cur.mean + 1.0, 0.5 * cur.cov)
        out = condition_past_states(joint, updated)
        np.testing.assert_allclose(out.mean[:3], past.mean, atol=1e-12)
        np.testing.assert_allclose(out.cov[:3, :3], past.cov, atol=1e-12)

    def test_trailing_block_exact(self):
        rng = np.random.default_rng(31)
        joint = self._random_joint(rng, 4, 2)
        updated = _random_density(rng, 2)
        out = condition_past_states(joint, updated)
        assert np.array_equal(out.mean[4:], updated.mean)
        assert np.array_equal(out.cov[4:, 4:], updated.cov)

    def test_idempotent(self):
        rng = np.random.default_rng(37)
        joint = self._random_joint(rng, 3, 2)
        updated = _random_density(rng, 2)
        once = condition_past_states(joint, updated)
        twice = condition_past_states(once, updated)
        np.testing.assert_allclose(once.mean, twice.mean, atol=1e-10)
        np.testing.assert_allclose(once.cov, twice.cov, atol=1e-10)


class TestCovarianceHygiene:
    def test_symmetrize(self):
        mat = np.array([[1.0, 2.0], [0.0, 1.0]])
        out = symmetrize(mat)
        np.testing.assert_allclose(out, out.T)
        np.testing.assert_allclose(out, [[1.0, 1.0], [1.0, 1.0]])

    def test_clamps_tiny_negative_eigenvalue(self):
        mat = np.diag([1.0, -1e-12])
        out = clamp_psd(mat)
        assert np.linalg.eigvalsh(out).min() >= 0.0

    def test_rejects_strongly_indefinite(self):
        with pytest.raises(NonPsdCovarianceError):
            clamp_psd(np.diag([1.0, -1.0]))

    def test_psd_passthrough(self):
        rng = np.random.default_rng(41)
        root = rng.standard_normal((4, 4))
        mat = root @ root.T
        np.testing.assert_allclose(clamp_psd(mat), mat, atol=1e-12)

    def test_density_validates_shapes(self):
        with pytest.raises(ValueError):
            GaussianDensity(np.zeros(2), np.eye(3))
        with pytest.raises(ValueError):
            GaussianDensity(np.array([np.nan, 0.0]), np.eye(2))
