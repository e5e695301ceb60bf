"""
Target Measures

Distributions pi to integrate against: uniform boxes, Gaussian mixtures,
the uniform sphere, atomic (empirical) measures and unnormalised power
posteriors. Measures are frozen after construction.
"""

from abc import ABC, abstractmethod
from collections.abc import Callable
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.special import gammaln, logsumexp

from probcub.app.config import get_settings
from probcub.app.errors import ArgumentError, UnsupportedOperationError
from probcub.app.models import FloatArray, PointSet, Provenance, deduplicate

LogFunction = Callable[[np.ndarray], float]


class Measure(BaseModel, ABC):
    """A target distribution on a subset of R^dim."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @property
    @abstractmethod
    def dim(self) -> int:
        """Dimension of the ambient space."""

    @property
    def name(self) -> str:
        return type(self).__name__

    def _check_point(self, x: Any) -> np.ndarray:
        arr = np.asarray(x, dtype=float).reshape(-1)
        if arr.shape != (self.dim,):
            raise ArgumentError(
                f"{self.name} expects a point of dimension {self.dim}, got {arr.size}"
            )
        return arr

    @abstractmethod
    def log_density(self, x: Any) -> float:
        """log pi(x) for a single point."""

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n raw points (duplicates possible for atomic measures)."""
        raise UnsupportedOperationError(
            f"{self.name} cannot be sampled directly; use mcmc_points"
        )


class UniformBox(Measure):
    """Uniform distribution on the box [lo, hi]."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    @model_validator(mode="after")
    def _check_bounds(self) -> "UniformBox":
        if len(self.lo) != len(self.hi) or not self.lo:
            raise ValueError("lo and hi must be nonempty and of equal length")
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError("lo < hi must hold componentwise")
        return self

    @classmethod
    def unit(cls, d: int = 1) -> "UniformBox":
        return cls(lo=(0.0,) * d, hi=(1.0,) * d)

    @classmethod
    def cube(cls, lo: float, hi: float, d: int) -> "UniformBox":
        return cls(lo=(float(lo),) * d, hi=(float(hi),) * d)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def lo_array(self) -> np.ndarray:
        return np.asarray(self.lo)

    @property
    def hi_array(self) -> np.ndarray:
        return np.asarray(self.hi)

    @property
    def is_unit(self) -> bool:
        return all(a == 0.0 for a in self.lo) and all(b == 1.0 for b in self.hi)

    @property
    def log_volume(self) -> float:
        return float(np.sum(np.log(self.hi_array - self.lo_array)))

    def log_density(self, x: Any) -> float:
        arr = self._check_point(x)
        if np.any(arr < self.lo_array) or np.any(arr > self.hi_array):
            return float("-inf")
        return -self.log_volume

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.random((n, self.dim))
        return self.lo_array + u * (self.hi_array - self.lo_array)


class GaussianMixture(Measure):
    """Finite mixture of Gaussians with SPD covariances."""

    weights: FloatArray
    means: FloatArray
    covariances: FloatArray

    @model_validator(mode="after")
    def _check_components(self) -> "GaussianMixture":
        if self.weights.ndim != 1 or self.weights.size == 0:
            raise ValueError("weights must be a nonempty vector")
        k = self.weights.shape[0]
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if self.means.ndim != 2 or self.means.shape[0] != k:
            raise ValueError("means must be a (components, d) array")
        d = self.means.shape[1]
        if self.covariances.shape != (k, d, d):
            raise ValueError(f"covariances must have shape ({k}, {d}, {d})")
        for cov in self.covariances:
            if not np.allclose(cov, cov.T) or np.linalg.eigvalsh(cov).min() <= 0:
                raise ValueError("covariances must be symmetric positive definite")
        return self

    @classmethod
    def gaussian(cls, mean: Any, cov: Any) -> "GaussianMixture":
        """Single-component mixture N(mean, cov)."""
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        return cls(weights=[1.0], means=mean[None, :], covariances=cov[None, :, :])

    @classmethod
    def standard_normal(cls, d: int = 1) -> "GaussianMixture":
        return cls.gaussian(np.zeros(d), np.eye(d))

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    @property
    def components(self) -> int:
        return int(self.weights.shape[0])

    def log_density(self, x: Any) -> float:
        arr = self._check_point(x)
        terms = []
        for w, mean, cov in zip(self.weights, self.means, self.covariances):
            chol = np.linalg.cholesky(cov)
            r = np.linalg.solve(chol, arr - mean)
            logdet = 2.0 * np.sum(np.log(np.diag(chol)))
            terms.append(
                np.log(w) - 0.5 * (r @ r + logdet + self.dim * np.log(2.0 * np.pi))
            )
        return float(logsumexp(terms))

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        labels = rng.choice(self.components, size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        out = np.empty((n, self.dim))
        for c in range(self.components):
            mask = labels == c
            chol = np.linalg.cholesky(self.covariances[c])
            out[mask] = self.means[c] + z[mask] @ chol.T
        return out


class UniformSphere(Measure):
    """Normalised surface measure on the unit sphere S^d in R^{d+1}."""

    d: int = Field(default=2, ge=1)

    @property
    def dim(self) -> int:
        return self.d + 1

    @property
    def log_area(self) -> float:
        k = self.d + 1
        return float(np.log(2.0) + 0.5 * k * np.log(np.pi) - gammaln(0.5 * k))

    def log_density(self, x: Any) -> float:
        arr = self._check_point(x)
        if abs(np.linalg.norm(arr) - 1.0) > 1e-9:
            raise ArgumentError("point is not on the unit sphere")
        return -self.log_area

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        g = rng.standard_normal((n, self.dim))
        return g / np.linalg.norm(g, axis=1, keepdims=True)


class Empirical(Measure):
    """Atomic measure sum_j w_j delta_{x_j}; weights may be negative."""

    points: FloatArray
    weights: FloatArray

    @field_validator("points")
    @classmethod
    def _two_dimensional(cls, value: np.ndarray) -> np.ndarray:
        if value.ndim == 1:
            value = value.reshape(-1, 1)
        if value.ndim != 2 or value.shape[0] == 0:
            raise ValueError("points must be a nonempty (m, d) array")
        return value

    @model_validator(mode="after")
    def _check_weights(self) -> "Empirical":
        if self.weights.shape != (self.points.shape[0],):
            raise ValueError("weights must have one entry per atom")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")
        return self

    @classmethod
    def uniform(cls, points: Any) -> "Empirical":
        pts = np.asarray(points, dtype=float)
        m = pts.shape[0]
        return cls(points=pts, weights=np.full(m, 1.0 / m))

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def m(self) -> int:
        return int(self.points.shape[0])

    def log_density(self, x: Any) -> float:
        raise UnsupportedOperationError("atomic measures have no density")

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        w = np.asarray(self.weights)
        if np.any(w < 0) or w.sum() <= 0:
            raise ArgumentError("sampling needs nonnegative weights with positive mass")
        idx = rng.choice(self.m, size=n, p=w / w.sum())
        return np.asarray(self.points)[idx]


class PowerPosterior(Measure):
    """
    Unnormalised tempered posterior pi_t(x) ∝ p(y|x)^t p(x).

    The density is never normalised; at t = 0 the likelihood is not evaluated.
    """

    log_likelihood: LogFunction
    log_prior: LogFunction
    t: float = Field(ge=0.0, le=1.0)
    ndim: int = Field(ge=1)

    @property
    def dim(self) -> int:
        return self.ndim

    def log_density(self, x: Any) -> float:
        arr = self._check_point(x)
        lp = float(self.log_prior(arr))
        if self.t == 0.0 or not np.isfinite(lp):
            return lp
        return self.t * float(self.log_likelihood(arr)) + lp


def log_density(measure: Measure, x: Any) -> float:
    """
    Log density of a measure at a point.

    Args:
        measure: Target measure (not Empirical).
        x: Point of the measure's dimension.

    Returns:
        log pi(x); unnormalised for PowerPosterior.

    Raises:
        ArgumentError: If x has the wrong dimension.
        UnsupportedOperationError: For atomic measures.
    """
    return measure.log_density(x)


def sample(measure: Measure, n: int, seed: int) -> PointSet:
    """
    Draw n states from a directly sampleable measure.

    Repeated atoms (possible only for Empirical measures) are merged into
    one state whose multiplicity is recorded in ``counts``.

    Args:
        measure: UniformBox, GaussianMixture, UniformSphere or Empirical.
        n: Number of draws, n >= 1.
        seed: Seed; the output is a pure function of (measure, n, seed).

    Returns:
        PointSet tagged MC.
    """
    if n < 1:
        raise ArgumentError(f"n must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    raw = measure.draw(n, rng)
    kept, counts = deduplicate(raw, get_settings().dedup_tol)
    dropped = n - len(kept)
    return PointSet(
        points=raw[kept],
        provenance=Provenance.mc(),
        seed=seed,
        counts=counts if dropped else None,
        dropped=dropped,
    )
