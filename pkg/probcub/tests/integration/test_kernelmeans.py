"""
Unit tests for integration.kernelmeans module.

Tests closed-form kernel means against numerical quadrature, the empirical
kernel mean and its error bound.
"""

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from probcub.app.errors import ArgumentError, UnsupportedPairError
from probcub.app.integration.kernelmeans import (
    analytic_mean,
    catalogue,
    empirical_mean,
    initial_error,
    mean_at,
    mean_error_bound,
    mean_vector,
)
from probcub.app.integration.kernels import (
    Brownian,
    ExpQuadratic,
    MaternTP,
    SphereSobolev32,
    WeightedSobolev,
)
from probcub.app.integration.measures import GaussianMixture, UniformBox, UniformSphere
from probcub.app.integration.pointsets import mc_points, spherical_fibonacci
from probcub.app.models import KernelMeanForm, PointSet


TIGHT = {"epsabs": 1e-13, "epsrel": 1e-12}


def box_average(kernel, x, lo, hi):
    breaks = [x] if lo < x < hi else None
    value, _ = quad(
        lambda y: kernel.eval([x], [y]), lo, hi, points=breaks, limit=200, **TIGHT
    )
    return value / (hi - lo)


class TestMaternBox:
    """Test the Matern kernel mean on uniform boxes."""

    @pytest.mark.parametrize("alpha", [1.5, 2.5, 3.5])
    @pytest.mark.parametrize("x", [-1.0, 0.2, 1.7])
    def test_mean_matches_quadrature(self, alpha, x):
        """Test mu(x) against adaptive quadrature."""
        k = MaternTP(alpha=alpha, sigma=0.4, lam=1.5)
        km = analytic_mean(k, UniformBox.cube(-1.0, 2.0, 1))
        assert mean_at(km, [x]) == pytest.approx(box_average(k, x, -1.0, 2.0), rel=1e-8)

    @pytest.mark.parametrize("alpha", [1.5, 3.5])
    def test_initial_error_matches_quadrature(self, alpha):
        """Test PiPi[k] as the box average of mu."""
        k = MaternTP(alpha=alpha, sigma=0.4)
        km = analytic_mean(k, UniformBox.cube(-1.0, 2.0, 1))
        value, _ = quad(lambda y: mean_at(km, [y]), -1.0, 2.0, limit=200, **TIGHT)
        assert initial_error(km) == pytest.approx(value / 3.0, rel=1e-8)

    def test_mean_factorises_over_dimensions(self):
        """Test the tensor-product structure in two dimensions."""
        k = MaternTP(alpha=2.5, sigma=(0.3, 0.8))
        km = analytic_mean(k, UniformBox.unit(2))
        first = analytic_mean(MaternTP(alpha=2.5, sigma=0.3), UniformBox.unit(1))
        second = analytic_mean(MaternTP(alpha=2.5, sigma=0.8), UniformBox.unit(1))
        x = [0.2, 0.9]
        assert mean_at(km, x) == pytest.approx(mean_at(first, [0.2]) * mean_at(second, [0.9]))


class TestExpQuadraticMeans:
    """Test Gaussian-kernel means on boxes and Gaussian mixtures."""

    def test_box_mean_matches_quadrature(self):
        """Test mu(x) on a box."""
        k = ExpQuadratic(sigma=0.7, lam=2.0)
        km = analytic_mean(k, UniformBox.cube(-2.0, 1.0, 1))
        assert mean_at(km, [0.3]) == pytest.approx(box_average(k, 0.3, -2.0, 1.0), rel=1e-9)

    def test_box_initial_error_matches_quadrature(self):
        """Test PiPi[k] on a box."""
        k = ExpQuadratic(sigma=0.7)
        km = analytic_mean(k, UniformBox.cube(-2.0, 1.0, 1))
        value, _ = quad(lambda y: mean_at(km, [y]), -2.0, 1.0, **TIGHT)
        assert initial_error(km) == pytest.approx(value / 3.0, rel=1e-9)

    def test_mixture_mean_matches_quadrature(self):
        """Test mu(x) under a two-component mixture."""
        k = ExpQuadratic(sigma=0.5)
        g = GaussianMixture(
            weights=[0.3, 0.7], means=[[-1.0], [1.5]], covariances=[[[0.5]], [[2.0]]]
        )
        km = analytic_mean(k, g)

        def density(y):
            return 0.3 * stats.norm.pdf(y, -1.0, np.sqrt(0.5)) + 0.7 * stats.norm.pdf(
                y, 1.5, np.sqrt(2.0)
            )

        value, _ = quad(lambda y: k.eval([0.4], [y]) * density(y), -np.inf, np.inf, **TIGHT)
        assert mean_at(km, [0.4]) == pytest.approx(value, rel=1e-8)

    def test_mixture_initial_error_matches_quadrature(self):
        """Test PiPi[k] under a Gaussian."""
        k = ExpQuadratic(sigma=0.5)
        km = analytic_mean(k, GaussianMixture.gaussian([0.0], [[1.0]]))
        value, _ = quad(lambda y: mean_at(km, [y]) * stats.norm.pdf(y), -np.inf, np.inf, **TIGHT)
        assert initial_error(km) == pytest.approx(value, rel=1e-8)


class TestOtherClosedForms:
    """Test the Sobolev, sphere and Brownian kernel means."""

    def test_sphere_constants(self):
        """Test mu = PiPi = 4/3 for the Sobolev(3/2) sphere kernel."""
        km = analytic_mean(SphereSobolev32(), UniformSphere())
        np.testing.assert_allclose(mean_vector(km, spherical_fibonacci(5)), 4 / 3)
        assert initial_error(km) == pytest.approx(4 / 3)

    def test_sphere_constant_matches_lattice_average(self):
        """Test that averaging k(x, .) over a dense lattice gives 4/3."""
        k = SphereSobolev32()
        lattice = spherical_fibonacci(20000)
        average = k.matrix(np.array([[0.0, 0.6, 0.8]]), lattice).mean()
        assert average == pytest.approx(4 / 3, abs=1e-3)

    def test_sobolev_mean_is_empty_set_weight(self):
        """Test mu(x) = gamma_empty for weighted Sobolev kernels."""
        k = WeightedSobolev(alpha=1, d=2, order_weights=(0.5, 1.0, 1.0))
        km = analytic_mean(k, UniformBox.unit(2))
        np.testing.assert_allclose(mean_vector(km, np.array([[0.1, 0.7], [0.9, 0.3]])), 0.5)

    def test_sobolev_needs_unit_box(self):
        """Test that the Sobolev closed form is refused off the unit box."""
        with pytest.raises(UnsupportedPairError):
            analytic_mean(WeightedSobolev.order_two(1), UniformBox.cube(-1.0, 1.0, 1))

    def test_brownian_mean(self):
        """Test mu(x) = x - x^2/2 and PiPi = 1/3."""
        km = analytic_mean(Brownian(), UniformBox.unit(1))
        assert mean_at(km, [0.4]) == pytest.approx(0.4 - 0.08)
        assert initial_error(km) == pytest.approx(1 / 3)


class TestUnsupportedPairs:
    """Test pairs without a closed form."""

    def test_matern_under_gaussian_raises(self):
        """Test that an unsupported pair raises UnsupportedPairError."""
        with pytest.raises(UnsupportedPairError) as info:
            analytic_mean(MaternTP(), GaussianMixture.standard_normal(1))
        assert info.value.kernel == "MaternTP"
        assert not info.value.recognized

    def test_catalogue_lists_recognized_rows(self):
        """Test that the catalogue includes implemented and recognized rows."""
        statuses = {row["status"] for row in catalogue()}
        assert statuses == {"implemented", "recognized-unimplemented"}
        row = {"kernel": "MaternTP", "measure": "UniformBox", "status": "implemented"}
        assert row in catalogue()


class TestEmpiricalMean:
    """Test empirical kernel means."""

    def test_mean_is_weighted_kernel_sum(self, matern, rng):
        """Test mu(x) = sum_j w_j k(x_j, x)."""
        samples = rng.random((40, 1))
        km = empirical_mean(matern, samples)
        X = rng.random((5, 1))
        np.testing.assert_allclose(mean_vector(km, X), matern.matrix(X, samples).mean(axis=1))
        assert km.form == KernelMeanForm.EMPIRICAL
        assert km.m == 40

    def test_initial_error_is_double_sum(self, matern, rng):
        """Test PiPi as the weighted double sum."""
        samples = rng.random((30, 1))
        weights = rng.random(30)
        km = empirical_mean(matern, samples, weights)
        expected = weights @ matern.matrix(samples) @ weights
        assert initial_error(km) == pytest.approx(expected)

    def test_converges_to_closed_form(self, matern, unit_box):
        """Test that many uniform samples approximate the exact kernel mean."""
        km = empirical_mean(matern, mc_points(unit_box, 20000, seed=11))
        exact = analytic_mean(matern, unit_box)
        assert mean_at(km, [0.3]) == pytest.approx(mean_at(exact, [0.3]), abs=0.02)

    def test_rejects_empty_samples(self, matern):
        """Test that an empirical mean needs samples."""
        with pytest.raises(ArgumentError):
            empirical_mean(matern, PointSet.empty(1))

    def test_rejects_misaligned_weights(self, matern, rng):
        """Test that weights must match the samples."""
        with pytest.raises(ArgumentError):
            empirical_mean(matern, rng.random((5, 1)), np.ones(4))


class TestMeanErrorBound:
    """Test the empirical kernel-mean error bound."""

    def test_formula(self):
        """Test 2 sqrt(sup k / m) + sqrt(log(2 / delta) / (2 m))."""
        k = MaternTP(lam=2.0)
        expected = 2 * np.sqrt(2.0 / 100) + np.sqrt(np.log(2 / 0.05) / 200)
        assert mean_error_bound(k, 100, 0.05) == pytest.approx(expected)

    def test_effective_sample_size_replaces_m(self):
        """Test the ess override."""
        k = MaternTP()
        assert mean_error_bound(k, 1000, 0.1, ess=50.0) == pytest.approx(
            mean_error_bound(k, 50, 0.1)
        )

    def test_decreases_with_m(self):
        """Test that more samples tighten the bound."""
        k = MaternTP()
        assert mean_error_bound(k, 400, 0.05) < mean_error_bound(k, 100, 0.05)

    @pytest.mark.parametrize("delta", [0.0, 1.5])
    def test_rejects_invalid_delta(self, delta):
        """Test that delta must lie in (0, 1]."""
        with pytest.raises(ArgumentError):
            mean_error_bound(MaternTP(), 10, delta)
