"""
Posterior Models

Pydantic records for cubature weights, posteriors over an integral, and
thermodynamic-integration results.
"""

from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import stats

from probcub.app.errors import ArgumentError
from probcub.app.models.arrays import FloatArray


class PosteriorFamily(str, Enum):
    """Distribution family of a cubature posterior."""

    GAUSSIAN = "Gaussian"
    STUDENT_T = "StudentT"


class KernelMeanForm(str, Enum):
    """Whether a kernel mean is exact or built from samples."""

    ANALYTIC = "Analytic"
    EMPIRICAL = "Empirical"


def _check_gamma(gamma: float) -> None:
    if not 0.0 < gamma < 1.0:
        raise ArgumentError(f"gamma must lie in (0, 1), got {gamma}")


class CubatureWeights(BaseModel):
    """Bayesian cubature weights w = K^{-1} z with the jitter that was needed."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    weights: FloatArray
    z: FloatArray
    jitter: float = Field(default=0.0, ge=0.0)


class CubaturePosterior(BaseModel):
    """
    Posterior over the value of an integral.

    For the Student-t family ``variance`` holds the squared scale, so
    ``scale`` is the same property for both families. ``inflation`` is the
    kernel-mean error bound added when the kernel mean was empirical.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mean: float
    variance: float = Field(ge=0.0)
    family: PosteriorFamily = PosteriorFamily.GAUSSIAN
    dof: int | None = Field(default=None, ge=1)
    inflation: float | None = Field(default=None, ge=0.0)
    weights: FloatArray
    n: int = Field(ge=0)
    jitter: float = Field(default=0.0, ge=0.0)
    kernel_mean_form: KernelMeanForm = KernelMeanForm.ANALYTIC
    delta: float | None = Field(default=None, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_invariants(self) -> "CubaturePosterior":
        if self.weights.shape != (self.n,):
            raise ValueError(f"weights must have shape ({self.n},)")
        if self.family == PosteriorFamily.STUDENT_T and self.dof != self.n:
            raise ValueError("Student-t posterior must have dof equal to n")
        if self.family == PosteriorFamily.GAUSSIAN and self.dof is not None:
            raise ValueError("Gaussian posterior has no degrees of freedom")
        empirical = self.kernel_mean_form == KernelMeanForm.EMPIRICAL
        if empirical != (self.inflation is not None):
            raise ValueError("inflation is set exactly when the kernel mean is empirical")
        return self

    @property
    def scale(self) -> float:
        return float(np.sqrt(self.variance))

    @property
    def predictive_variance(self) -> float:
        """Variance of the posterior distribution itself (infinite for dof <= 2)."""
        if self.family == PosteriorFamily.GAUSSIAN:
            return self.variance
        assert self.dof is not None
        if self.dof <= 2:
            return float("inf")
        return self.variance * self.dof / (self.dof - 2)

    def quantile(self, q: float) -> float:
        """Standardised quantile of the posterior family."""
        if self.family == PosteriorFamily.STUDENT_T:
            return float(stats.t.ppf(q, df=self.dof))
        return float(stats.norm.ppf(q))

    def credible_interval(self, gamma: float) -> tuple[float, float]:
        """
        Central 100(1 - gamma)% credible interval.

        Args:
            gamma: Tail mass outside the interval, 0 < gamma < 1.

        Returns:
            Tuple of (lo, hi).
        """
        _check_gamma(gamma)
        half = self.quantile(1.0 - gamma / 2.0) * self.scale
        return self.mean - half, self.mean + half


class TemperatureSchedule(BaseModel):
    """Temperature ladder 0 = t_1 < ... < t_m = 1."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t: FloatArray

    @field_validator("t")
    @classmethod
    def _ladder(cls, value: np.ndarray) -> np.ndarray:
        if value.ndim != 1 or value.size < 2:
            raise ValueError("a schedule needs at least two temperatures")
        if value[0] != 0.0 or value[-1] != 1.0:
            raise ValueError("a schedule must start at 0 and end at 1")
        if np.any(np.diff(value) <= 0):
            raise ValueError("temperatures must be strictly increasing")
        return value

    @property
    def m(self) -> int:
        return int(self.t.size)


class TIPosterior(BaseModel):
    """
    Result of probabilistic thermodynamic integration.

    ``mu`` and ``cov`` describe the inner posterior over the rung
    expectations g(t_a). The log-evidence posterior is Gaussian with mean
    ``logz_mean`` and variance ``logz_var_outer + logz_var_propagated``: the
    first part comes from the outer cubature, the second from propagating
    the inner uncertainty. ``cov`` is built from empirical kernel means and
    under-estimates the covariance at finite sample size unless its diagonal
    has been widened by the empirical-measure bound.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    schedule: TemperatureSchedule
    mu: FloatArray
    cov: FloatArray
    logz_mean: float
    logz_var_outer: float = Field(ge=0.0)
    logz_var_propagated: float = Field(ge=0.0)
    sigma_is_approximate: bool = True
    trapezium: float | None = None
    hyperparameters: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_invariants(self) -> "TIPosterior":
        m = self.schedule.m
        if self.mu.shape != (m,) or self.cov.shape != (m, m):
            raise ValueError(f"mu and cov must match the {m}-rung schedule")
        scale = max(1.0, float(np.max(np.abs(self.cov))))
        if not np.allclose(self.cov, self.cov.T, rtol=0.0, atol=1e-10 * scale):
            raise ValueError("cov must be symmetric")
        if np.linalg.eigvalsh(self.cov).min() < -1e-8 * scale:
            raise ValueError("cov must be positive semi-definite")
        return self

    @property
    def var_total(self) -> float:
        return self.logz_var_outer + self.logz_var_propagated

    def credible_interval(self, gamma: float) -> tuple[float, float]:
        """Central 100(1 - gamma)% Gaussian interval for the log-evidence."""
        _check_gamma(gamma)
        half = float(stats.norm.ppf(1.0 - gamma / 2.0)) * float(np.sqrt(self.var_total))
        return self.logz_mean - half, self.logz_mean + half
