"""
Unit tests for integration.measures module.

Tests densities, validation and direct sampling of the target measures.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from probcub.app.errors import ArgumentError, UnsupportedOperationError
from probcub.app.integration.measures import (
    Empirical,
    GaussianMixture,
    PowerPosterior,
    UniformBox,
    UniformSphere,
    log_density,
    sample,
)


class TestUniformBox:
    """Test the uniform box measure."""

    def test_density_inside_is_inverse_volume(self):
        """Test that the log density inside the box is minus the log volume."""
        box = UniformBox(lo=(0.0, -1.0), hi=(2.0, 1.0))
        assert log_density(box, [1.0, 0.0]) == pytest.approx(-np.log(4.0))

    def test_density_outside_is_minus_infinity(self):
        """Test that points outside the box have zero density."""
        box = UniformBox.unit(2)
        assert log_density(box, [1.5, 0.5]) == float("-inf")

    def test_rejects_inverted_bounds(self):
        """Test that lo >= hi is refused at construction."""
        with pytest.raises(ValidationError):
            UniformBox(lo=(1.0,), hi=(0.0,))

    def test_rejects_wrong_point_dimension(self):
        """Test that a point of the wrong dimension raises ArgumentError."""
        with pytest.raises(ArgumentError):
            log_density(UniformBox.unit(2), [0.5])

    def test_is_unit(self):
        """Test the unit-box flag."""
        assert UniformBox.unit(3).is_unit
        assert not UniformBox.cube(-5.0, 5.0, 3).is_unit

    def test_draws_lie_in_box(self):
        """Test that samples stay inside the box."""
        X = sample(UniformBox.cube(-5.0, 5.0, 2), 500, seed=3)
        pts = np.asarray(X.points)
        assert pts.shape == (500, 2)
        assert pts.min() >= -5.0 and pts.max() <= 5.0


class TestGaussianMixture:
    """Test the Gaussian mixture measure."""

    def test_standard_normal_density(self):
        """Test the density at the origin of a standard normal."""
        g = GaussianMixture.standard_normal(2)
        assert log_density(g, [0.0, 0.0]) == pytest.approx(-np.log(2.0 * np.pi))

    def test_mixture_density_is_weighted_sum(self):
        """Test that the mixture density combines its components."""
        g = GaussianMixture(
            weights=[0.25, 0.75],
            means=[[-1.0], [2.0]],
            covariances=[[[1.0]], [[4.0]]],
        )
        x = 0.3
        expected = 0.25 * np.exp(-0.5 * 1.3**2) / np.sqrt(2 * np.pi) + 0.75 * np.exp(
            -0.5 * 1.7**2 / 4.0
        ) / np.sqrt(8 * np.pi)
        assert np.exp(log_density(g, [x])) == pytest.approx(expected, rel=1e-12)

    def test_rejects_weights_not_summing_to_one(self):
        """Test that mixture weights must sum to 1."""
        with pytest.raises(ValidationError):
            GaussianMixture(
                weights=[0.5, 0.4], means=[[0.0], [1.0]], covariances=[[[1.0]], [[1.0]]]
            )

    def test_rejects_indefinite_covariance(self):
        """Test that covariances must be positive definite."""
        with pytest.raises(ValidationError):
            GaussianMixture.gaussian([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])

    def test_sample_moments(self):
        """Test that draws have roughly the right mean and variance."""
        g = GaussianMixture.gaussian([1.0], [[4.0]])
        pts = np.asarray(sample(g, 20000, seed=9).points)[:, 0]
        assert pts.mean() == pytest.approx(1.0, abs=0.05)
        assert pts.var() == pytest.approx(4.0, rel=0.05)


class TestUniformSphere:
    """Test the uniform sphere measure."""

    def test_draws_have_unit_norm(self):
        """Test that sphere draws lie on S^2."""
        pts = np.asarray(sample(UniformSphere(), 100, seed=1).points)
        np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-12)

    def test_density_is_inverse_area(self):
        """Test that the density is 1 / (4 pi) on S^2."""
        assert log_density(UniformSphere(), [0.0, 0.0, 1.0]) == pytest.approx(-np.log(4 * np.pi))

    def test_off_sphere_point_raises(self):
        """Test that a point off the sphere raises ArgumentError."""
        with pytest.raises(ArgumentError):
            log_density(UniformSphere(), [0.0, 0.0, 2.0])


class TestEmpirical:
    """Test atomic measures."""

    def test_has_no_density(self):
        """Test that log_density is unsupported for atomic measures."""
        with pytest.raises(UnsupportedOperationError):
            log_density(Empirical.uniform([[0.0], [1.0]]), [0.0])

    def test_repeated_atoms_are_counted(self):
        """Test that resampled atoms are merged and their multiplicities kept."""
        measure = Empirical.uniform([[0.0], [1.0], [2.0]])
        X = sample(measure, 50, seed=2)
        assert X.n <= 3
        assert X.multiplicities().sum() == 50
        assert X.dropped == 50 - X.n

    def test_negative_weights_cannot_be_sampled(self):
        """Test that signed atomic measures cannot be sampled."""
        measure = Empirical(points=[[0.0], [1.0]], weights=[1.5, -0.5])
        with pytest.raises(ArgumentError):
            sample(measure, 5, seed=0)


class TestPowerPosterior:
    """Test tempered posteriors."""

    def test_zero_temperature_skips_likelihood(self):
        """Test that the likelihood is not evaluated at t = 0."""

        def likelihood(x):
            raise AssertionError("likelihood evaluated at t = 0")

        target = PowerPosterior(
            log_likelihood=likelihood, log_prior=lambda x: -0.5 * float(x @ x), t=0.0, ndim=1
        )
        assert target.log_density([2.0]) == pytest.approx(-2.0)

    @pytest.mark.parametrize("t", [0.25, 1.0])
    def test_tempered_density(self, t):
        """Test that log pi_t = t log L + log p."""
        target = PowerPosterior(
            log_likelihood=lambda x: -float(x[0] ** 2),
            log_prior=lambda x: -abs(float(x[0])),
            t=t,
            ndim=1,
        )
        assert target.log_density([1.5]) == pytest.approx(-t * 2.25 - 1.5)

    def test_cannot_be_sampled_directly(self):
        """Test that power posteriors need MCMC."""
        target = PowerPosterior(
            log_likelihood=lambda x: 0.0, log_prior=lambda x: 0.0, t=0.5, ndim=1
        )
        with pytest.raises(UnsupportedOperationError):
            sample(target, 10, seed=0)


class TestSample:
    """Test the sample operation."""

    def test_is_deterministic_in_seed(self):
        """Test that the same seed gives the same states."""
        box = UniformBox.unit(3)
        np.testing.assert_array_equal(sample(box, 10, 4).points, sample(box, 10, 4).points)

    def test_rejects_zero_draws(self):
        """Test that n = 0 raises ArgumentError."""
        with pytest.raises(ArgumentError):
            sample(UniformBox.unit(1), 0, seed=0)
