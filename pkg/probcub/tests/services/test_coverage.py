"""
Unit tests for services.coverage module.
"""

import numpy as np
import pytest

from probcub.app.models import CoverageParams, ExperimentConfig, ExperimentName
from probcub.app.services.coverage import COLUMNS, coverage_table, run_coverage, sigma_grid


@pytest.fixture
def small_params():
    return CoverageParams(
        test_fns=["f1"], n_grid=[10, 20], gamma_grid=[0.05, 0.5], replicates=3, sigma_hi=10.0
    )


class TestCoverage:
    """Test coverage tables."""

    def test_sigma_grid(self):
        """Test the log-spaced EB grid with its density per decade."""
        grid = sigma_grid(CoverageParams(sigma_lo=0.01, sigma_hi=100.0, eb_points_per_decade=2))
        assert grid.size == 9
        assert grid[0] == pytest.approx(0.01) and grid[-1] == pytest.approx(100.0)

    def test_small_table(self, small_params):
        """Test shape, replicate counts and the range of coverage values."""
        table = coverage_table(small_params, seed=3)
        assert list(table.columns) == COLUMNS
        assert len(table) == 4
        assert np.all(table["replicates"] <= 3)
        assert table["coverage"].between(0.0, 1.0).all()

    def test_wider_intervals_cover_more(self, small_params):
        """Test that coverage at gamma = 0.05 is at least that at gamma = 0.5."""
        table = coverage_table(small_params, seed=3)
        for _, rows in table.groupby("n"):
            wide, narrow = rows.sort_values("gamma")["coverage"].to_list()
            assert wide >= narrow

    def test_reruns_are_identical(self, small_params):
        """Test that results depend only on the seed, not the thread count."""
        a = coverage_table(small_params, seed=1, threads=1)
        b = coverage_table(small_params, seed=1, threads=3)
        assert a.equals(b)

    def test_run_writes_outputs(self, small_params, tmp_path):
        """Test the CSV and SVG outputs."""
        config = ExperimentConfig(experiment=ExperimentName.COVERAGE, output_dir=tmp_path)
        paths = run_coverage(config, small_params)
        assert paths["table"].name == "coverage.csv"
        assert paths["plot"].exists()

    @pytest.mark.slow
    def test_marginal_intervals_are_calibrated_at_large_n(self):
        """Test that 95% intervals for f1 at n = 500 cover the truth in 200 replicates."""
        params = CoverageParams(test_fns=["f1"], n_grid=[500], gamma_grid=[0.05])
        assert params.replicate_count == 200
        table = coverage_table(params, seed=0, threads=4)
        assert table["replicates"].iloc[0] >= 180
        assert table["coverage"].iloc[0] >= 0.90
