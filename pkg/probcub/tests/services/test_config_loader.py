"""
Unit tests for services.config_loader module.
"""

from pathlib import Path

import pytest

from probcub.app.config import get_settings
from probcub.app.errors import ConfigError
from probcub.app.models import ConvergenceParams, CoverageParams, ExperimentName
from probcub.app.services.config_loader import (
    describe_parameters,
    load_experiment,
    read_config_file,
)


@pytest.fixture
def config_file(tmp_path):
    """Write a config file and return its path."""

    def write(text: str) -> Path:
        path = tmp_path / "experiment.conf"
        path.write_text(text)
        return path

    return write


class TestReadConfigFile:
    """Test raw parsing."""

    def test_comments_and_whitespace(self, config_file):
        """Test that comments and blank lines are ignored."""
        path = config_file("# coverage run\n\nd = 2\nreplicates = 5   # small\n")
        assert read_config_file(path) == {"d": "2", "replicates": "5"}

    def test_missing_file(self, tmp_path):
        """Test that a missing file raises ConfigError."""
        with pytest.raises(ConfigError):
            read_config_file(tmp_path / "absent.conf")

    def test_key_without_value(self, config_file):
        """Test that a bare key raises ConfigError."""
        with pytest.raises(ConfigError):
            read_config_file(config_file("d\n"))


class TestLoadExperiment:
    """Test validation and precedence."""

    def test_defaults(self):
        """Test that no file gives the defaults."""
        config, params = load_experiment("coverage")
        assert config.experiment == ExperimentName.COVERAGE
        assert config.seed == 0
        assert params == CoverageParams()

    def test_lists_are_parsed(self, config_file):
        """Test comma-separated lists."""
        path = config_file("n_grid = 10, 20, 40\ntest_fns = f2\n")
        _, params = load_experiment("coverage", path)
        assert params.n_grid == [10, 20, 40]
        assert params.test_fns == ["f2"]

    def test_command_line_wins(self, config_file, tmp_path):
        """Test that explicit options override file values."""
        path = config_file("seed = 5\nthreads = 2\noutput_dir = from_file\n")
        config, _ = load_experiment("convergence", path, tmp_path / "cli", seed=9)
        assert config.seed == 9
        assert config.threads == 2
        assert config.output_dir == tmp_path / "cli"

    def test_file_values_reach_parameters(self, config_file):
        """Test that non-run keys become experiment parameters."""
        path = config_file("kernel = sobolev\nalphas = 1, 2\n")
        config, params = load_experiment("convergence", path)
        assert isinstance(params, ConvergenceParams)
        assert params.alphas == [1.0, 2.0]
        assert config.parameters == {"kernel": "sobolev", "alphas": "1, 2"}

    def test_unknown_key(self, config_file):
        """Test that unknown keys are rejected."""
        with pytest.raises(ConfigError):
            load_experiment("coverage", config_file("colour = blue\n"))

    def test_invalid_value(self, config_file):
        """Test that a non-increasing grid is rejected."""
        with pytest.raises(ConfigError):
            load_experiment("coverage", config_file("n_grid = 50, 20\n"))

    def test_unknown_experiment(self):
        """Test that an unknown experiment name raises ConfigError."""
        with pytest.raises(ConfigError):
            load_experiment("nonsense")

    def test_settings_supply_run_defaults(self, monkeypatch):
        """Test that PROBCUB_THREADS sets the default pool size."""
        monkeypatch.setenv("PROBCUB_THREADS", "3")
        get_settings.cache_clear()
        config, _ = load_experiment("sphere")
        assert config.threads == 3


class TestDescribeParameters:
    """Test the parameter listing."""

    def test_lists_every_experiment(self):
        """Test that each experiment and some keys appear."""
        text = describe_parameters()
        for name in ExperimentName:
            assert f"{name.value}:" in text
        assert "n_per_rung" in text
        assert "output_dir" in text
