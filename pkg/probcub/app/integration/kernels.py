"""
Kernel Catalogue

Reproducing kernels used for Bayesian cubature and Gram-matrix assembly.
Kernels are frozen pydantic models; evaluation is vectorised through
``Kernel.matrix``.
"""

from abc import ABC, abstractmethod
from functools import cached_property
from itertools import combinations
from math import comb, factorial
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.special import bernoulli

from probcub.app.config import Settings
from probcub.app.errors import ArgumentError, UnsupportedOperationError
from probcub.app.integration.linalg import GramFactor, factorize
from probcub.app.models import PointSet, as_points

DOMAIN_TOL = 1e-9

# Coefficients a_j of the half-integer Matern form sum_j a_j s^j e^{-s}.
MATERN_COEFFS: dict[float, tuple[float, ...]] = {
    1.5: (1.0, 1.0),
    2.5: (1.0, 1.0, 1.0 / 3.0),
    3.5: (1.0, 1.0, 2.0 / 5.0, 1.0 / 15.0),
}


class Kernel(BaseModel, ABC):
    """A positive-definite kernel k(x, y)."""

    model_config = ConfigDict(frozen=True)

    @property
    def name(self) -> str:
        return type(self).__name__

    @property
    def amplitude(self) -> float:
        return 1.0

    def check_domain(self, X: Any) -> np.ndarray:
        """Validate points against the kernel's domain and return an (n, d) array."""
        return as_points(X)

    @abstractmethod
    def _matrix(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Cross-covariance on already validated arrays."""

    def matrix(self, X: Any, Y: Any | None = None) -> np.ndarray:
        """
        Cross-covariance matrix k(X, Y).

        Args:
            X: (n, d) points or PointSet.
            Y: (m, d) points or PointSet (defaults to X).

        Returns:
            (n, m) array.
        """
        A = self.check_domain(X)
        B = A if Y is None else self.check_domain(Y)
        if A.shape[1] != B.shape[1]:
            raise ArgumentError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
        if A.shape[0] == 0 or B.shape[0] == 0:
            return np.zeros((A.shape[0], B.shape[0]))
        return self._matrix(A, B)

    def diag(self, X: Any) -> np.ndarray:
        """k(x_i, x_i) for every point."""
        A = self.check_domain(X)
        return np.array([self._matrix(a[None, :], a[None, :])[0, 0] for a in A])

    def eval(self, x: Any, y: Any) -> float:
        """k(x, y) for two single points."""
        a = np.asarray(x, dtype=float).reshape(1, -1)
        b = np.asarray(y, dtype=float).reshape(1, -1)
        return float(self.matrix(a, b)[0, 0])

    @abstractmethod
    def sup_diagonal(self) -> float:
        """Supremum of k(x, x) over the kernel's domain."""

    def with_lengthscale(self, sigma: Any) -> "Kernel":
        raise UnsupportedOperationError(f"{self.name} has no lengthscale")

    def with_amplitude(self, lam: float) -> "Kernel":
        raise UnsupportedOperationError(f"{self.name} has no amplitude")


def _check_unit_box(X: Any) -> np.ndarray:
    A = as_points(X)
    if A.size and (A.min() < -DOMAIN_TOL or A.max() > 1.0 + DOMAIN_TOL):
        raise ArgumentError("points must lie in the unit box [0, 1]^d")
    return np.clip(A, 0.0, 1.0)


class Brownian(Kernel):
    """Brownian motion covariance min(x, y) on [0, 1]."""

    def check_domain(self, X: Any) -> np.ndarray:
        A = _check_unit_box(X)
        if A.shape[1] != 1:
            raise ArgumentError("the Brownian kernel is one-dimensional")
        return A

    def _matrix(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return np.minimum(X[:, 0][:, None], Y[:, 0][None, :])

    def diag(self, X: Any) -> np.ndarray:
        return self.check_domain(X)[:, 0].copy()

    def sup_diagonal(self) -> float:
        return 1.0


def _lengthscales(value: Any) -> tuple[float, ...]:
    return tuple(float(s) for s in np.atleast_1d(np.asarray(value, dtype=float)))


def matern_profile(alpha: float, s: np.ndarray) -> np.ndarray:
    """Unit-amplitude half-integer Matern correlation as a function of s = c r / sigma."""
    coeffs = MATERN_COEFFS[alpha]
    return np.polynomial.polynomial.polyval(s, coeffs) * np.exp(-s)


class MaternTP(Kernel):
    """
    Tensor product of one-dimensional half-integer Matern kernels.

    Each factor is P(s) e^{-s} with s = sqrt(2 alpha) |x_i - y_i| / sigma_i. A
    single sigma is shared by every dimension.
    """

    alpha: Literal[1.5, 2.5, 3.5] = 1.5
    sigma: tuple[float, ...] = (1.0,)
    lam: float = Field(default=1.0, gt=0)

    @field_validator("sigma", mode="before")
    @classmethod
    def _as_tuple(cls, value: Any) -> Any:
        return _lengthscales(value)

    @field_validator("sigma")
    @classmethod
    def _positive(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not value or any(s <= 0 for s in value):
            raise ValueError("lengthscales must be positive")
        return value

    @property
    def amplitude(self) -> float:
        return self.lam

    @property
    def rate(self) -> float:
        """The constant sqrt(2 alpha) in s = sqrt(2 alpha) r / sigma."""
        return float(np.sqrt(2.0 * self.alpha))

    def sigmas(self, d: int) -> np.ndarray:
        """Per-dimension lengthscales, broadcasting an isotropic value."""
        if len(self.sigma) == 1:
            return np.full(d, self.sigma[0])
        if len(self.sigma) != d:
            raise ArgumentError(f"kernel has {len(self.sigma)} lengthscales, points have {d}")
        return np.asarray(self.sigma)

    def _matrix(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        sig = self.sigmas(X.shape[1])
        out = np.full((X.shape[0], Y.shape[0]), self.lam)
        for i in range(X.shape[1]):
            s = self.rate * np.abs(X[:, i][:, None] - Y[:, i][None, :]) / sig[i]
            out *= matern_profile(self.alpha, s)
        return out

    def diag(self, X: Any) -> np.ndarray:
        return np.full(self.check_domain(X).shape[0], self.lam)

    def sup_diagonal(self) -> float:
        return self.lam

    def with_lengthscale(self, sigma: Any) -> "MaternTP":
        return self.model_copy(update={"sigma": _lengthscales(sigma)})

    def with_amplitude(self, lam: float) -> "MaternTP":
        return self.model_copy(update={"lam": float(lam)})


class ExpQuadratic(Kernel):
    """Isotropic Gaussian kernel lam * exp(-|x - y|^2 / (2 sigma^2))."""

    sigma: float = Field(default=1.0, gt=0)
    lam: float = Field(default=1.0, gt=0)

    @property
    def amplitude(self) -> float:
        return self.lam

    def _matrix(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        sq = np.zeros((X.shape[0], Y.shape[0]))
        for i in range(X.shape[1]):
            sq += (X[:, i][:, None] - Y[:, i][None, :]) ** 2
        return self.lam * np.exp(-0.5 * sq / self.sigma**2)

    def diag(self, X: Any) -> np.ndarray:
        return np.full(self.check_domain(X).shape[0], self.lam)

    def sup_diagonal(self) -> float:
        return self.lam

    def with_lengthscale(self, sigma: Any) -> "ExpQuadratic":
        return self.model_copy(update={"sigma": float(np.asarray(sigma).reshape(-1)[0])})

    def with_amplitude(self, lam: float) -> "ExpQuadratic":
        return self.model_copy(update={"lam": float(lam)})


def bernoulli_polynomial(k: int, t: np.ndarray) -> np.ndarray:
    """B_k(t) from the Bernoulli numbers, B_k(t) = sum_j C(k, j) B_j t^{k-j}."""
    numbers = bernoulli(k)
    out = np.zeros_like(np.asarray(t, dtype=float))
    for j in range(k + 1):
        out = out + comb(k, j) * numbers[j] * np.asarray(t) ** (k - j)
    return out


class WeightedSobolev(Kernel):
    """
    Weighted Sobolev kernel of smoothness alpha on [0, 1]^d.

    k(x, y) = sum_u gamma_u prod_{i in u} phi(x_i, y_i) with the one-dimensional
    component phi(x, y) = sum_{k=1}^alpha B_k(x) B_k(y) / (k!)^2
    - (-1)^alpha B_{2 alpha}(|x - y|) / (2 alpha)!.

    Weights are either order-dependent (``order_weights[j]`` for every subset
    of size j) or an explicit map from 0-based coordinate tuples to weights.
    """

    alpha: int = Field(default=1, ge=1)
    d: int = Field(ge=1)
    order_weights: tuple[float, ...] | None = None
    subset_weights: dict[tuple[int, ...], float] | None = None

    @model_validator(mode="after")
    def _check_weights(self) -> "WeightedSobolev":
        if (self.order_weights is None) == (self.subset_weights is None):
            raise ValueError("give exactly one of order_weights and subset_weights")
        if self.order_weights is not None:
            if any(g < 0 for g in self.order_weights) or not self.order_weights:
                raise ValueError("order weights must be nonnegative")
            d_max = len(self.order_weights) - 1
            if d_max > self.d:
                raise ValueError(f"order weights go beyond d = {self.d}")
            if d_max > 3 and self.d > 20:
                raise ValueError("full subset sums are refused for d > 20; use d_max <= 3")
        else:
            assert self.subset_weights is not None
            for u, g in self.subset_weights.items():
                if g <= 0:
                    raise ValueError("subset weights must be positive")
                if list(u) != sorted(set(u)) or (u and (u[0] < 0 or u[-1] >= self.d)):
                    raise ValueError(f"invalid coordinate subset {u}")
        return self

    @classmethod
    def order_two(cls, d: int, alpha: int = 1) -> "WeightedSobolev":
        """gamma_u = 1 for |u| <= 2, 0 otherwise."""
        return cls(alpha=alpha, d=d, order_weights=(1.0,) * (min(d, 2) + 1))

    @classmethod
    def full_interaction(cls, d: int, alpha: int = 1) -> "WeightedSobolev":
        """Weight 1 on the empty set and on {1, ..., d} only."""
        return cls(alpha=alpha, d=d, subset_weights={(): 1.0, tuple(range(d)): 1.0})

    @property
    def gamma_empty(self) -> float:
        if self.order_weights is not None:
            return self.order_weights[0]
        assert self.subset_weights is not None
        return self.subset_weights.get((), 0.0)

    def gamma(self, u: tuple[int, ...]) -> float:
        """Weight of a coordinate subset."""
        if self.order_weights is not None:
            return self.order_weights[len(u)] if len(u) < len(self.order_weights) else 0.0
        assert self.subset_weights is not None
        return self.subset_weights.get(tuple(u), 0.0)

    def check_domain(self, X: Any) -> np.ndarray:
        A = _check_unit_box(X)
        if A.shape[1] != self.d:
            raise ArgumentError(f"kernel is {self.d}-dimensional, points are {A.shape[1]}")
        return A

    def component(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """One-dimensional factor phi(x, y), broadcasting x against y."""
        out = (-1.0) ** (self.alpha + 1) * bernoulli_polynomial(
            2 * self.alpha, np.abs(x - y)
        ) / factorial(2 * self.alpha)
        for k in range(1, self.alpha + 1):
            out = out + bernoulli_polynomial(k, x) * bernoulli_polynomial(k, y) / factorial(
                k
            ) ** 2
        return out

    def _matrix(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        shape = (X.shape[0], Y.shape[0])
        if self.order_weights is not None:
            # elementary symmetric sums e_j of the per-dimension factors
            d_max = len(self.order_weights) - 1
            e = [np.ones(shape)] + [np.zeros(shape) for _ in range(d_max)]
            for i in range(self.d):
                phi = self.component(X[:, i][:, None], Y[:, i][None, :])
                for j in range(d_max, 0, -1):
                    e[j] += phi * e[j - 1]
            return sum((g * e[j] for j, g in enumerate(self.order_weights)), np.zeros(shape))

        assert self.subset_weights is not None
        cache: dict[int, np.ndarray] = {}
        out = np.zeros(shape)
        for u, g in self.subset_weights.items():
            term = np.full(shape, g)
            for i in u:
                if i not in cache:
                    cache[i] = self.component(X[:, i][:, None], Y[:, i][None, :])
                term = term * cache[i]
            out += term
        return out

    @cached_property
    def _psi_max(self) -> float:
        t = np.linspace(0.0, 1.0, 10_000)
        return float(np.max(self.component(t, t)))

    def sup_diagonal(self) -> float:
        psi = self._psi_max
        if self.order_weights is not None:
            return float(
                sum(g * comb(self.d, j) * psi**j for j, g in enumerate(self.order_weights))
            )
        assert self.subset_weights is not None
        return float(sum(g * psi ** len(u) for u, g in self.subset_weights.items()))

    def subsets(self) -> list[tuple[int, ...]]:
        """Every subset with nonzero weight (exponential in d_max; small d only)."""
        if self.subset_weights is not None:
            return list(self.subset_weights)
        d_max = len(self.order_weights or ()) - 1
        return [
            u for j in range(d_max + 1) for u in combinations(range(self.d), j) if self.gamma(u)
        ]


class SphereSobolev32(Kernel):
    """k(x, y) = 8/3 - |x - y| on the unit sphere S^2."""

    def check_domain(self, X: Any) -> np.ndarray:
        A = as_points(X)
        if A.shape[1] != 3:
            raise ArgumentError("the sphere kernel needs points in R^3")
        if A.size and np.max(np.abs(np.linalg.norm(A, axis=1) - 1.0)) > DOMAIN_TOL:
            raise ArgumentError("points must lie on the unit sphere")
        return A

    def _matrix(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        sq = np.zeros((X.shape[0], Y.shape[0]))
        for i in range(3):
            sq += (X[:, i][:, None] - Y[:, i][None, :]) ** 2
        return 8.0 / 3.0 - np.sqrt(sq)

    def diag(self, X: Any) -> np.ndarray:
        return np.full(self.check_domain(X).shape[0], 8.0 / 3.0)

    def sup_diagonal(self) -> float:
        return 8.0 / 3.0


def gram(kernel: Kernel, X: PointSet | np.ndarray, settings: Settings | None = None) -> GramFactor:
    """
    Assemble and factorise the Gram matrix of a point set.

    Args:
        kernel: Kernel to evaluate.
        X: Deduplicated states.
        settings: Jitter policy (defaults to the cached settings).

    Returns:
        GramFactor with the matrix and the jitter actually added.

    Raises:
        ConditioningError: If Cholesky fails at the largest jitter.
    """
    return factorize(kernel.matrix(X), settings)
