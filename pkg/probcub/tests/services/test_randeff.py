"""
Unit tests for services.randeff module.
"""

import numpy as np
import pytest

from probcub.app.errors import ArgumentError
from probcub.app.integration.pointsets import digital_net
from probcub.app.models import CubaturePosterior, PosteriorFamily, RandeffParams
from probcub.app.services.integrands import RandomEffectsData
from probcub.app.services.randeff import COLUMNS, negative_mass, net_order, randeff_table


@pytest.fixture
def params():
    return RandeffParams(knots=4, observations=10, m_min=2, m_max=4, truth_m=8)


class TestRandeff:
    """Test the random-effects marginal likelihood experiment."""

    def test_table(self, params):
        """Test one row per net exponent with ordered intervals."""
        table = randeff_table(params)
        assert list(table.columns) == COLUMNS
        assert table["m"].tolist() == [2, 3, 4]
        assert table["n"].tolist() == [4, 8, 16]
        assert np.all(table["lo"] <= table["mean"]) and np.all(table["mean"] <= table["hi"])
        assert table["negative_mass"].between(0.0, 1.0).all()
        assert (table["truth"] > 0).all()

    def test_reference_must_use_a_larger_net(self, params):
        """Test that truth_m must exceed m_max."""
        with pytest.raises(ArgumentError):
            randeff_table(params.model_copy(update={"truth_m": 4}))

    def test_net_order_is_capped(self):
        """Test that the net order follows alpha up to 3."""
        assert net_order(RandeffParams(alpha=2)) == 2
        assert net_order(RandeffParams(alpha=5)) == 3

    def test_default_likelihood_has_weak_high_order_interactions(self):
        """Test that log p(y | beta, u) varies by about a nat over the default prior."""
        params = RandeffParams()
        data = RandomEffectsData.generate(
            params.observations, params.knots, params.tau, params.beta, params.data_seed
        )
        X = digital_net(data.dim, 8)
        log_f = np.log(data.likelihood(params.beta)(np.asarray(X.points)))
        assert np.all(np.isfinite(log_f))
        assert np.std(log_f) < 2.0

    @pytest.mark.slow
    def test_default_intervals_cover_reference(self):
        """Test the 50-dimensional case: intervals cover the QMC reference and error shrinks."""
        table = randeff_table(RandeffParams())
        assert table["n"].tolist() == [2**m for m in range(4, 13)]
        assert table["covered"].mean() >= 0.6
        error = (table["mean"] - table["truth"]).abs()
        assert error.iloc[-1] < error.iloc[0]


class TestNegativeMass:
    """Test the probability of a negative integral."""

    def post(self, mean, variance):
        return CubaturePosterior(
            mean=mean,
            variance=variance,
            family=PosteriorFamily.STUDENT_T,
            dof=4,
            weights=np.zeros(4),
            n=4,
        )

    def test_centred_posterior(self):
        """Test mass 1/2 when the mean is zero."""
        assert negative_mass(self.post(0.0, 1.0)) == pytest.approx(0.5)

    def test_point_mass(self):
        """Test a zero-scale posterior."""
        assert negative_mass(self.post(-1.0, 0.0)) == 1.0
        assert negative_mass(self.post(1.0, 0.0)) == 0.0
