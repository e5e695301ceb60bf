"""
Integrands

Test functions, the synthetic rendering scene, the Poisson random-effects
likelihood and the logistic-regression models used by the experiments,
each with its reference value where one is computable.
"""

from collections.abc import Callable
from itertools import combinations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats
from scipy.integrate import quad
from scipy.special import erf, roots_legendre

from probcub.app.errors import ArgumentError, UnsupportedOperationError
from probcub.app.integration.thermo import TIModel
from probcub.app.models import FloatArray, as_points

OSCILLATION_CONSTANTS = {"f1": 5.0, "f2": 20.0}
TRUTH_MAX_DIM = 3
VIEW_DIRECTION = np.array([0.0, 0.0, 1.0])
UNIT_CLIP = 1e-12

Integrand = Callable[[np.ndarray], np.ndarray]


def oscillatory_function(name: str) -> Integrand:
    """f(x) = exp(sin(C x_1)^2 - |x|^2) with C = 5 (f1) or 20 (f2)."""
    if name not in OSCILLATION_CONSTANTS:
        raise ArgumentError(f"unknown test function {name!r}")
    c = OSCILLATION_CONSTANTS[name]

    def f(X: np.ndarray) -> np.ndarray:
        X = as_points(X)
        return np.exp(np.sin(c * X[:, 0]) ** 2 - np.sum(X**2, axis=1))

    return f


def oscillatory_truth(name: str, d: int, lo: float = -5.0, hi: float = 5.0) -> float:
    """
    Uniform-box average of a test function.

    The integrand factorises over coordinates, so one oscillatory 1-D
    quadrature and closed-form Gaussian factors suffice.

    Raises:
        UnsupportedOperationError: If d > 3.
    """
    if name not in OSCILLATION_CONSTANTS:
        raise ArgumentError(f"unknown test function {name!r}")
    if d > TRUTH_MAX_DIM:
        raise UnsupportedOperationError(f"no reference value for d = {d} > {TRUTH_MAX_DIM}")
    c = OSCILLATION_CONSTANTS[name]
    first, _ = quad(
        lambda x: np.exp(np.sin(c * x) ** 2 - x**2), lo, hi, limit=1000, epsabs=1e-14, epsrel=1e-12
    )
    gauss = 0.5 * np.sqrt(np.pi) * (erf(hi) - erf(lo))
    return float(first * gauss ** (d - 1) / (hi - lo) ** d)


class RadianceScene(BaseModel):
    """
    Smooth three-channel environment map on the sphere.

    Each channel is a positive base level plus von Mises-Fisher-like bumps
    a exp(kappa (mu . w - 1)).
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    directions: FloatArray
    kappas: FloatArray
    amplitudes: FloatArray
    base: FloatArray

    @classmethod
    def from_seed(cls, seed: int, bumps: int = 5) -> "RadianceScene":
        rng = np.random.default_rng(seed)
        directions = rng.standard_normal((bumps, 3))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        return cls(
            directions=directions,
            kappas=rng.uniform(1.0, 8.0, bumps),
            amplitudes=rng.uniform(0.2, 2.0, (3, bumps)),
            base=rng.uniform(0.05, 0.3, 3),
        )

    def radiance(self, omega: np.ndarray) -> np.ndarray:
        """Incoming radiance per channel, shape (n, 3)."""
        omega = as_points(omega)
        bumps = np.exp(self.kappas[None, :] * (omega @ self.directions.T - 1.0))
        return self.base[None, :] + bumps @ self.amplitudes.T

    def integrand(self, omega: np.ndarray) -> np.ndarray:
        """Reflected radiance L(w) rho(w, n) [w . n]_+ for w_o = n = (0, 0, 1)."""
        omega = as_points(omega)
        cosine = omega @ VIEW_DIRECTION
        brdf = np.exp(cosine - 1.0) / (2.0 * np.pi)
        return self.radiance(omega) * (brdf * np.maximum(cosine, 0.0))[:, None]

    def channel(self, c: int) -> Integrand:
        return lambda omega: self.integrand(omega)[:, c]

    def truth(self, nodes: int = 256) -> np.ndarray:
        """
        Average over the uniform sphere measure, per channel.

        Only the upper hemisphere contributes, so Gauss-Legendre in z on
        [0, 1] times a periodic trapezium rule in the azimuth is exact to
        machine precision for this smooth integrand.
        """
        x, w = roots_legendre(nodes)
        z, wz = 0.5 * (x + 1.0), 0.5 * w
        phi = 2.0 * np.pi * np.arange(2 * nodes) / (2 * nodes)
        Z, P = np.meshgrid(z, phi, indexing="ij")
        R = np.sqrt(1.0 - Z**2)
        omega = np.column_stack([(R * np.cos(P)).ravel(), (R * np.sin(P)).ravel(), Z.ravel()])
        values = self.integrand(omega).reshape(nodes, 2 * nodes, 3)
        azimuthal = values.mean(axis=1) * 2.0 * np.pi
        return (wz @ azimuthal) / (4.0 * np.pi)


class RandomEffectsData(BaseModel):
    """Poisson semi-parametric regression data with truncated-linear spline basis."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    z1: FloatArray
    z2: FloatArray
    y: FloatArray
    knots: FloatArray
    tau: float = Field(gt=0)

    @classmethod
    def generate(
        cls,
        observations: int,
        knots: int,
        tau: float,
        beta: list[float],
        seed: int,
    ) -> "RandomEffectsData":
        """Draw covariates, random effects and counts at the given fixed effects."""
        if len(beta) != 3:
            raise ArgumentError("beta must have three entries (b0, b1, b2)")
        rng = np.random.default_rng(seed)
        z1 = rng.integers(0, 2, observations).astype(float)
        z2 = rng.uniform(0.0, 1.0, observations)
        kappa = np.linspace(z2.min(), z2.max(), knots)
        u = rng.normal(0.0, 1.0 / np.sqrt(tau), knots)
        eta = beta[0] + beta[1] * z1 + beta[2] * z2 + _spline_basis(z2, kappa) @ u
        y = rng.poisson(np.exp(eta)).astype(float)
        return cls(z1=z1, z2=z2, y=y, knots=kappa, tau=tau)

    @property
    def dim(self) -> int:
        return int(self.knots.size)

    def likelihood(self, beta: list[float], chunk: int = 8192) -> Integrand:
        """
        p(y | beta, u) with u = Phi^{-1}(x) / sqrt(tau), as a function on [0, 1]^d.
        """
        basis = _spline_basis(self.z2, self.knots)
        fixed = beta[0] + beta[1] * self.z1 + beta[2] * self.z2

        def f(X: np.ndarray) -> np.ndarray:
            X = as_points(X)
            out = np.empty(X.shape[0])
            for start in range(0, X.shape[0], chunk):
                block = np.clip(X[start : start + chunk], UNIT_CLIP, 1.0 - UNIT_CLIP)
                u = stats.norm.ppf(block) / np.sqrt(self.tau)
                eta = fixed[None, :] + u @ basis.T
                out[start : start + chunk] = np.exp(
                    stats.poisson.logpmf(self.y[None, :], np.exp(eta)).sum(axis=1)
                )
            return out

        return f


def _spline_basis(z: np.ndarray, knots: np.ndarray) -> np.ndarray:
    return np.maximum(z[:, None] - knots[None, :], 0.0)


def logistic_data(
    n: int, covariates: int, true_model: list[int], seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Standard-normal design and Bernoulli responses, unit coefficients on the true model."""
    if any(not 0 <= j < covariates for j in true_model):
        raise ArgumentError("true_model refers to a covariate that does not exist")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, covariates))
    beta = np.zeros(covariates)
    beta[list(true_model)] = 1.0
    p = 1.0 / (1.0 + np.exp(-(X @ beta)))
    y = (rng.random(n) < p).astype(float)
    return X, y


def candidate_models(covariates: int, max_size: int) -> list[tuple[int, ...]]:
    """All covariate subsets of size at most max_size, smallest first."""
    return [s for k in range(max_size + 1) for s in combinations(range(covariates), k)]


def model_label(subset: tuple[int, ...]) -> str:
    return "none" if not subset else "+".join(f"x{j + 1}" for j in subset)


def logistic_model(
    X: np.ndarray, y: np.ndarray, subset: tuple[int, ...], prior_precision: float = 0.01
) -> TIModel:
    """
    Logistic regression without intercept on a covariate subset.

    Coefficients have independent N(0, 1 / prior_precision) priors.
    """
    if not subset:
        raise ArgumentError("the empty model has no parameters to integrate")
    design = X[:, list(subset)]
    prior_sd = 1.0 / np.sqrt(prior_precision)

    def log_likelihood(beta: np.ndarray) -> float:
        eta = design @ beta
        return float(np.sum(y * eta - np.logaddexp(0.0, eta)))

    def log_prior(beta: np.ndarray) -> float:
        return float(stats.norm.logpdf(beta, scale=prior_sd).sum())

    return TIModel(
        name=model_label(subset),
        log_likelihood=log_likelihood,
        log_prior=log_prior,
        ndim=len(subset),
        initial=np.zeros(len(subset)),
    )


def empty_model_evidence(y: np.ndarray) -> float:
    """Log-evidence of the model with no covariates (every p_i = 1/2)."""
    return float(y.size * np.log(0.5))


def log_model_prior(subset: tuple[int, ...], covariates: int) -> float:
    """Unnormalised log prior -|subset| log d."""
    return -len(subset) * float(np.log(covariates))
