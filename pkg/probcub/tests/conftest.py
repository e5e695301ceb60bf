"""
Shared test fixtures and configuration for all tests.

Provides fresh settings, common measures and kernels, and small point sets.
"""

import os

import numpy as np
import pytest

from probcub.app.config import Settings, get_settings
from probcub.app.integration.kernelmeans import analytic_mean
from probcub.app.integration.kernels import MaternTP
from probcub.app.integration.measures import UniformBox
from probcub.app.integration.pointsets import mc_points


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Clear cached settings so PROBCUB_* variables from the shell do not leak in."""
    for key in list(os.environ):
        if key.startswith("PROBCUB_"):
            monkeypatch.delenv(key)
    monkeypatch.setenv("PROBCUB_LOG_LEVEL", "WARNING")
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def settings():
    """Default settings instance (ignoring any .env file)."""
    return Settings(_env_file=None)


@pytest.fixture
def rng():
    """Seeded random generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def unit_box():
    """Uniform measure on [0, 1]."""
    return UniformBox.unit(1)


@pytest.fixture
def matern():
    """Matern 5/2 kernel with a moderate lengthscale."""
    return MaternTP(alpha=2.5, sigma=0.3)


@pytest.fixture
def matern_mean(matern, unit_box):
    """Closed-form kernel mean of the Matern fixture on [0, 1]."""
    return analytic_mean(matern, unit_box)


@pytest.fixture
def mc_states(unit_box):
    """Twenty i.i.d. uniform states on [0, 1]."""
    return mc_points(unit_box, 20, seed=5)
