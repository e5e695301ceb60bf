"""
Unit tests for integration.cubature module.

Tests Bayesian cubature weights and posteriors, worst-case errors,
empirical-Bayes hyperparameters and the inflated empirical posterior.
"""

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import trapezoid

from probcub.app.errors import ArgumentError, ConditioningError, UnsupportedOperationError
from probcub.app.integration.cubature import (
    approx_bc_posterior,
    bc_posterior,
    bc_posterior_eb,
    bc_posterior_studentt,
    bc_weights,
    clamp_variance,
    credible_interval,
    eb_amplitude,
    eb_lengthscale,
    log_marginal_likelihood,
    mc_estimate,
    wce_squared,
)
from probcub.app.integration.kernelmeans import (
    KernelMean,
    analytic_mean,
    empirical_mean,
    mean_error_bound,
)
from probcub.app.integration.kernels import Brownian, ExpQuadratic, MaternTP
from probcub.app.integration.measures import UniformBox
from probcub.app.integration.pointsets import digital_net, mc_points
from probcub.app.models import KernelMeanForm, PointSet, PosteriorFamily


def wiggle(X):
    x = np.asarray(X.points)[:, 0]
    return np.sin(6.0 * x) + x**2


class TestBayesianCubature:
    """Test the Gaussian posterior."""

    def test_brownian_rule_is_trapezium_through_origin(self, rng, unit_box):
        """Test that the Brownian kernel reproduces the piecewise-linear interpolant."""
        x = np.append(rng.random(12), 1.0)
        X = PointSet(points=x[:, None])
        f = np.cos(3.0 * x) - 1.0 + x
        k = Brownian()
        post = bc_posterior(k, analytic_mean(k, unit_box), X, f)

        order = np.argsort(x)
        nodes = np.concatenate([[0.0], x[order]])
        values = np.concatenate([[0.0], f[order]])
        assert post.mean == pytest.approx(trapezoid(values, nodes), abs=1e-10)

    def test_variance_is_worst_case_error_of_weights(self, matern, matern_mean, mc_states):
        """Test that the posterior variance equals the squared WCE of the BC rule."""
        post = bc_posterior(matern, matern_mean, mc_states, wiggle(mc_states))
        assert post.variance == pytest.approx(
            wce_squared(matern, matern_mean, mc_states, post.weights), abs=1e-10
        )
        assert post.family == PosteriorFamily.GAUSSIAN
        assert post.n == mc_states.n

    def test_weights_minimise_worst_case_error(self, matern, matern_mean, mc_states, rng):
        """Test that perturbing the BC weights increases the WCE."""
        w = bc_weights(matern, matern_mean, mc_states).weights
        best = wce_squared(matern, matern_mean, mc_states, w)
        for _ in range(5):
            perturbed = w + 1e-2 * rng.standard_normal(w.size)
            assert wce_squared(matern, matern_mean, mc_states, perturbed) > best

    def test_empty_point_set_gives_prior(self, matern, matern_mean):
        """Test that n = 0 returns Gaussian(0, PiPi[k])."""
        post = bc_posterior(matern, matern_mean, PointSet.empty(1), [])
        assert post.mean == 0.0
        assert post.variance == pytest.approx(matern_mean.initial_error())
        assert post.n == 0

    def test_weights_carry_kernel_mean_vector(self, matern, matern_mean, mc_states):
        """Test K w = z."""
        result = bc_weights(matern, matern_mean, mc_states)
        K = matern.matrix(mc_states)
        np.testing.assert_allclose(K @ result.weights, result.z, atol=1e-8)

    def test_kernel_mismatch_raises(self, matern_mean, mc_states):
        """Test that a kernel mean built for another kernel is refused."""
        with pytest.raises(ArgumentError):
            bc_posterior(MaternTP(alpha=1.5), matern_mean, mc_states, wiggle(mc_states))

    def test_misaligned_values_raise(self, matern, matern_mean, mc_states):
        """Test that f must have one value per state."""
        with pytest.raises(ArgumentError):
            bc_posterior(matern, matern_mean, mc_states, np.ones(3))

    def test_error_decays_with_n(self):
        """Test the worst-case error rate on nets for Matern 3/2."""
        k = MaternTP(alpha=1.5, sigma=0.5)
        km = analytic_mean(k, UniformBox.unit(1))
        ns, errors = [], []
        for m in range(4, 8):
            X = digital_net(1, m)
            w = bc_weights(k, km, X).weights
            ns.append(X.n)
            errors.append(np.sqrt(wce_squared(k, km, X, w)))
        slope = np.polyfit(np.log(ns), np.log(errors), 1)[0]
        assert slope <= -1.3


class TestClampVariance:
    """Test round-off clamping."""

    def test_passes_nonnegative(self):
        """Test that valid variances are unchanged."""
        assert clamp_variance(0.25, 1.0) == 0.25

    def test_clamps_small_negative(self):
        """Test that round-off below zero becomes 0."""
        assert clamp_variance(-1e-9, 1.0) == 0.0

    def test_large_negative_raises(self):
        """Test that a clearly negative variance is a conditioning failure."""
        with pytest.raises(ConditioningError):
            clamp_variance(-1e-2, 1.0)

    @pytest.mark.parametrize("shortfall, clamped", [(1e-9, True), (1e-2, False)])
    def test_worst_case_error_is_clamped_relative_to_its_terms(
        self, matern, matern_mean, mc_states, monkeypatch, shortfall, clamped
    ):
        """Test that wce_squared clamps round-off and refuses a clearly negative value."""
        w = bc_weights(matern, matern_mean, mc_states).weights
        exact = wce_squared(matern, matern_mean, mc_states, w)
        initial = matern_mean.initial_error()
        monkeypatch.setattr(KernelMean, "initial_error", lambda self: initial - exact - shortfall)
        if clamped:
            assert wce_squared(matern, matern_mean, mc_states, w) == 0.0
        else:
            with pytest.raises(ConditioningError):
                wce_squared(matern, matern_mean, mc_states, w)


class TestStudentT:
    """Test the amplitude-marginalised posterior."""

    def test_matches_closed_form(self, matern, matern_mean, mc_states):
        """Test mean, squared scale and degrees of freedom against direct algebra."""
        f = wiggle(mc_states)
        post = bc_posterior_studentt(matern, matern_mean, mc_states, f)

        K = matern.matrix(mc_states)
        z = matern_mean.mean_vector(mc_states)
        w = np.linalg.solve(K, z)
        lam_hat = f @ np.linalg.solve(K, f) / mc_states.n
        assert post.family == PosteriorFamily.STUDENT_T
        assert post.dof == mc_states.n
        assert post.mean == pytest.approx(w @ f, rel=1e-8)
        expected = lam_hat * (matern_mean.initial_error() - z @ w)
        assert post.variance == pytest.approx(expected, rel=1e-5, abs=1e-10)

    def test_interval_uses_t_quantiles(self, matern, matern_mean, mc_states):
        """Test the Student-t credible interval width."""
        post = bc_posterior_studentt(matern, matern_mean, mc_states, wiggle(mc_states))
        lo, hi = credible_interval(post, 0.05)
        half = stats.t.ppf(0.975, df=mc_states.n) * post.scale
        assert hi - lo == pytest.approx(2 * half)

    def test_needs_two_states(self, matern, matern_mean):
        """Test that n < 2 is refused."""
        X = PointSet(points=[[0.5]])
        with pytest.raises(ArgumentError):
            bc_posterior_studentt(matern, matern_mean, X, [1.0])

    def test_needs_unit_amplitude(self, matern, mc_states, unit_box):
        """Test that the kernel passed in must be c_0."""
        k = matern.with_amplitude(2.0)
        with pytest.raises(ArgumentError):
            bc_posterior_studentt(k, analytic_mean(k, unit_box), mc_states, wiggle(mc_states))

    def test_amplitude_estimate(self, matern, mc_states):
        """Test lam_hat = f^T C_0^{-1} f / n."""
        f = wiggle(mc_states)
        K = matern.matrix(mc_states)
        expected = f @ np.linalg.solve(K, f) / mc_states.n
        assert eb_amplitude(matern, mc_states, f) == pytest.approx(expected, rel=1e-6)


class TestEmpiricalBayes:
    """Test lengthscale selection."""

    GRID = np.logspace(-2, 0, 9)

    def test_optimum_beats_grid(self, matern, mc_states):
        """Test that the refined lengthscale is at least as good as every grid point."""
        f = wiggle(mc_states)
        sigma, value = eb_lengthscale(matern, mc_states, f, self.GRID)
        grid_values = [
            log_marginal_likelihood(matern.with_lengthscale(s), mc_states, f) for s in self.GRID
        ]
        assert self.GRID[0] <= sigma[0] <= self.GRID[-1]
        assert value >= max(grid_values) - 1e-9
        assert value == pytest.approx(
            log_marginal_likelihood(matern.with_lengthscale(sigma), mc_states, f)
        )

    def test_per_dimension_lengthscales(self, rng):
        """Test one lengthscale per coordinate for MaternTP."""
        X = PointSet(points=rng.random((25, 2)))
        pts = np.asarray(X.points)
        f = np.sin(4.0 * pts[:, 0]) + 0.1 * pts[:, 1]
        sigma, _ = eb_lengthscale(MaternTP(alpha=2.5), X, f, self.GRID, per_dimension=True)
        assert sigma.shape == (2,)

    def test_per_dimension_needs_matern(self, mc_states):
        """Test that per-dimension mode is refused for the Gaussian kernel."""
        with pytest.raises(UnsupportedOperationError):
            eb_lengthscale(
                ExpQuadratic(), mc_states, wiggle(mc_states), self.GRID, per_dimension=True
            )

    def test_zero_integrand_is_refused(self, matern, mc_states):
        """Test that an integrand vanishing at every state names the problem."""
        zeros = np.zeros(mc_states.n)
        with pytest.raises(ArgumentError, match="zero at every"):
            log_marginal_likelihood(matern, mc_states, zeros)
        with pytest.raises(ArgumentError, match="fix the lengthscale"):
            eb_lengthscale(matern, mc_states, zeros, self.GRID)

    def test_rejects_bad_grid(self, matern, mc_states):
        """Test that the grid must be positive."""
        with pytest.raises(ArgumentError):
            eb_lengthscale(matern, mc_states, wiggle(mc_states), [-1.0, 1.0])

    @pytest.mark.parametrize("marginalise", [True, False])
    def test_posterior_with_eb_hyperparameters(self, mc_states, unit_box, marginalise):
        """Test both amplitude treatments."""
        post, kernel = bc_posterior_eb(
            MaternTP(alpha=2.5), unit_box, mc_states, wiggle(mc_states), self.GRID, marginalise
        )
        expected = PosteriorFamily.STUDENT_T if marginalise else PosteriorFamily.GAUSSIAN
        assert post.family == expected
        assert kernel.amplitude > 0
        truth = (1 - np.cos(6.0)) / 6.0 + 1 / 3
        assert post.mean == pytest.approx(truth, abs=3e-2)


class TestApproximatePosterior:
    """Test the posterior with an empirical kernel mean."""

    @pytest.fixture
    def samples(self, unit_box):
        return mc_points(unit_box, 2000, seed=77)

    def test_variance_is_inflated(self, matern, matern_mean, mc_states, samples):
        """Test that the inflated variance exceeds the exact posterior variance."""
        f = wiggle(mc_states)
        exact = bc_posterior(matern, matern_mean, mc_states, f)
        approx = approx_bc_posterior(matern, empirical_mean(matern, samples), mc_states, f)
        assert approx.variance >= exact.variance
        assert approx.mean == pytest.approx(exact.mean, abs=0.05)
        assert approx.kernel_mean_form == KernelMeanForm.EMPIRICAL

    def test_inflation_is_error_bound(self, matern, mc_states, samples):
        """Test that the recorded inflation is the kernel-mean error bound."""
        post = approx_bc_posterior(
            matern, empirical_mean(matern, samples), mc_states, wiggle(mc_states), delta=0.1
        )
        assert post.inflation == pytest.approx(mean_error_bound(matern, 2000, 0.1))
        assert post.delta == 0.1

    def test_gaussian_entry_point_delegates(self, matern, mc_states, samples):
        """Test that bc_posterior routes empirical kernel means to the inflated posterior."""
        post = bc_posterior(matern, empirical_mean(matern, samples), mc_states, wiggle(mc_states))
        assert post.inflation is not None
        assert post.delta == pytest.approx(0.05)

    def test_overlapping_samples_raise(self, matern, mc_states, samples):
        """Test that the cubature states must not be among the samples."""
        both = np.vstack([np.asarray(samples.points), np.asarray(mc_states.points)])
        with pytest.raises(ArgumentError):
            approx_bc_posterior(
                matern, empirical_mean(matern, both), mc_states, wiggle(mc_states)
            )

    @pytest.mark.parametrize("delta", [0.0, 1.0])
    def test_rejects_invalid_delta(self, matern, mc_states, samples, delta):
        """Test that delta must lie in (0, 1)."""
        with pytest.raises(ArgumentError):
            approx_bc_posterior(
                matern, empirical_mean(matern, samples), mc_states, wiggle(mc_states), delta
            )

    def test_needs_empirical_mean(self, matern, matern_mean, mc_states):
        """Test that an analytic kernel mean is refused."""
        with pytest.raises(ArgumentError):
            approx_bc_posterior(matern, matern_mean, mc_states, wiggle(mc_states))


class TestMonteCarloEstimate:
    """Test the equal-weight baseline."""

    def test_weighted_by_counts(self):
        """Test mean and standard error with multiplicities."""
        mean, stderr = mc_estimate([1.0, 2.0], counts=[3, 1])
        assert mean == pytest.approx(1.25)
        assert stderr == pytest.approx(0.25)

    def test_single_value_has_infinite_error(self):
        """Test that one value gives no error estimate."""
        assert mc_estimate([3.0]) == (3.0, float("inf"))

    def test_empty_raises(self):
        """Test that at least one value is needed."""
        with pytest.raises(ArgumentError):
            mc_estimate([])
