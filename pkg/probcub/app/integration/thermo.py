"""
Thermodynamic Integration

Log-evidence estimation over power posteriors with Bayesian cubature on both
the inner (parameter) and outer (temperature) integrals. Inner posteriors
share one pooled regression set across all rungs; the outer integral is done
in h = g / pi against the importance density pi(t).
"""

from collections.abc import Callable
from functools import lru_cache
from typing import Any

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats
from scipy.integrate import quad, trapezoid
from scipy.special import roots_legendre

from probcub.app.config import Settings, get_settings
from probcub.app.errors import ArgumentError, ConfigError
from probcub.app.integration.cubature import (
    clamp_variance,
    default_sigma_grid,
    eb_lengthscale,
    mc_estimate,
)
from probcub.app.integration.kernelmeans import mean_error_bound
from probcub.app.integration.kernels import ExpQuadratic, Kernel, gram
from probcub.app.integration.measures import PowerPosterior
from probcub.app.integration.pointsets import (
    effective_sample_size,
    mcmc_points,
    split_samples,
    tune_step,
)
from probcub.app.models import FloatArray, PointSet, TemperatureSchedule, TIPosterior, deduplicate

IMPORTANCE_EPS = 0.01
IMPORTANCE_CONSTANT = 1.306
OUTER_NODES = 512
MIN_RUNG_PART = 4
SCHEDULE_POWER = 5

LogFunction = Callable[[np.ndarray], float]


def default_schedule(m: int) -> TemperatureSchedule:
    """Power-law ladder t_i = ((i - 1) / (m - 1))^5, i = 1..m."""
    if m < 2:
        raise ArgumentError(f"a temperature schedule needs m >= 2, got {m}")
    t = (np.arange(m) / (m - 1)) ** SCHEDULE_POWER
    t[0], t[-1] = 0.0, 1.0
    return TemperatureSchedule(t=t)


def _unnormalised_importance(t: Any) -> Any:
    return 1.0 / (IMPORTANCE_EPS + 5.0 * np.power(t, 0.8))


@lru_cache
def importance_constant() -> float:
    """Normalising constant of the importance density, recomputed by quadrature."""
    mass, _ = quad(_unnormalised_importance, 0.0, 1.0, limit=200, epsabs=1e-13, epsrel=1e-12)
    constant = 1.0 / mass
    if abs(constant - IMPORTANCE_CONSTANT) > 1e-2:
        raise ConfigError(
            f"importance constant {constant:.5f} disagrees with {IMPORTANCE_CONSTANT}"
        )
    return constant


def importance_density(t: Any) -> Any:
    """
    Importance density c / (0.01 + 5 t^(4/5)) on [0, 1].

    Accepts a scalar or an array; scalars give a float.
    """
    arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ArgumentError("temperatures must lie in [0, 1]")
    value = importance_constant() * _unnormalised_importance(arr)
    return float(value) if value.ndim == 0 else value


def trapezium_ti(schedule: TemperatureSchedule, g_hat: Any) -> float:
    """Standard discretised TI estimate from per-rung expectations."""
    g = np.asarray(g_hat, dtype=float).reshape(-1)
    if g.shape != (schedule.m,):
        raise ArgumentError(f"got {g.size} rung values for {schedule.m} temperatures")
    return float(trapezoid(g, np.asarray(schedule.t)))


def _rung_weights(part: PointSet) -> np.ndarray:
    counts = part.multiplicities().astype(float)
    return counts / counts.sum()


def _thin(points: np.ndarray, values: np.ndarray, cap: int) -> tuple[np.ndarray, np.ndarray]:
    if points.shape[0] <= cap:
        return points, values
    idx = np.unique(np.linspace(0, points.shape[0] - 1, cap).round().astype(int))
    logger.debug(f"Thinned pooled set from {points.shape[0]} to {idx.size} states")
    return points[idx], values[idx]


def pooled_regression_set(
    rung_samples: list[PointSet],
    f_values: list[Any],
    split: float = 0.5,
    settings: Settings | None = None,
) -> tuple[list[PointSet], np.ndarray, np.ndarray]:
    """
    Split each rung into an empirical-measure part and a regression part.

    Regression parts of all rungs are pooled, deduplicated and thinned to
    ``pooled_cap`` states.

    Returns:
        Tuple of (empirical parts per rung, pooled states, pooled values).
    """
    settings = settings or get_settings()
    if len(rung_samples) != len(f_values):
        raise ArgumentError("one vector of values is needed per rung")

    empirical, pooled_x, pooled_f = [], [], []
    for a, (X, f) in enumerate(zip(rung_samples, f_values, strict=True)):
        values = np.asarray(f, dtype=float).reshape(-1)
        if values.shape != (X.n,):
            raise ArgumentError(f"rung {a}: got {values.size} values for {X.n} states")
        if X.n < 2 * MIN_RUNG_PART:
            raise ArgumentError(f"rung {a} has too few states ({X.n}) to split")
        k = int(np.clip(round(split * X.n), 1, X.n - 1))
        head, tail = split_samples(X, split, mode="head")
        if head.n < MIN_RUNG_PART or tail.n < MIN_RUNG_PART:
            raise ArgumentError(
                f"rung {a} leaves fewer than {MIN_RUNG_PART} states after the split"
            )
        empirical.append(head)
        pooled_x.append(np.asarray(tail.points))
        pooled_f.append(values[k:])

    points = np.vstack(pooled_x)
    values = np.concatenate(pooled_f)
    kept, _ = deduplicate(points, settings.dedup_tol)
    points, values = _thin(points[kept], values[kept], settings.pooled_cap)
    return empirical, points, values


def inner_posterior(
    kf: Kernel,
    rung_samples: list[PointSet],
    f_values: list[Any],
    schedule: TemperatureSchedule,
    split: float = 0.5,
    settings: Settings | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Joint posterior over the rung expectations g(t_a).

    Each rung's leading ``split`` share forms its empirical measure; the
    remaining states of every rung form one pooled regression set.

    Args:
        kf: Kernel on the parameter space.
        rung_samples: States for each temperature.
        f_values: Log-likelihood values aligned with each rung's states.
        schedule: Temperatures (one per rung).
        split: Share of each rung used for the empirical measure.
        settings: Jitter and pooling settings.

    Returns:
        Tuple of (mu of shape (m,), Sigma of shape (m, m)).

    Raises:
        ArgumentError: If a rung leaves fewer than four states after the split.
        ConditioningError: If the pooled Gram matrix is singular after jitter.
    """
    if len(rung_samples) != schedule.m:
        raise ArgumentError(f"got {len(rung_samples)} rungs for {schedule.m} temperatures")
    empirical, X, f = pooled_regression_set(rung_samples, f_values, split, settings)

    weights = [_rung_weights(part) for part in empirical]
    Z = np.vstack(
        [w @ kf.matrix(part.points, X) for part, w in zip(empirical, weights, strict=True)]
    )

    m = schedule.m
    PP = np.empty((m, m))
    for a in range(m):
        for b in range(a, m):
            value = weights[a] @ kf.matrix(empirical[a].points, empirical[b].points) @ weights[b]
            PP[a, b] = PP[b, a] = value

    factor = gram(kf, X, settings)
    A = factor.solve(Z.T)
    mu = A.T @ f
    Sigma = PP - Z @ A
    Sigma = 0.5 * (Sigma + Sigma.T)
    eig, vecs = np.linalg.eigh(Sigma)
    if eig.min() < 0.0:
        # round-off only; the exact matrix is PSD
        logger.debug(f"Clipped inner covariance eigenvalue {eig.min():.3e}")
        Sigma = (vecs * np.maximum(eig, 0.0)) @ vecs.T
        Sigma = 0.5 * (Sigma + Sigma.T)
    logger.debug(f"Inner posterior from {X.shape[0]} pooled states, jitter {factor.jitter:.2e}")
    return mu, Sigma


def temperature_coordinate(t: Any) -> np.ndarray:
    """Map temperatures to s = t^(1/5), where the default ladder is evenly spaced."""
    return np.power(np.asarray(t, dtype=float), 1.0 / SCHEDULE_POWER)


def _outer_quadrature() -> tuple[np.ndarray, np.ndarray]:
    # Gauss-Legendre in s; the weights carry pi(t) dt = pi(s^5) 5 s^4 ds.
    nodes, w = roots_legendre(OUTER_NODES)
    s = 0.5 * (nodes + 1.0)
    t = s**SCHEDULE_POWER
    weights = 0.5 * w * importance_density(t) * SCHEDULE_POWER * s ** (SCHEDULE_POWER - 1)
    return s, weights


def outer_kernel_mean(kh: Kernel, T: Any) -> tuple[np.ndarray, float]:
    """
    Kernel mean of kh under pi(t) at temperatures T and its double integral.

    kh acts on the coordinate s = t^(1/5).
    """
    s, w = _outer_quadrature()
    nodes = s[:, None]
    z = kh.matrix(temperature_coordinate(T).reshape(-1, 1), nodes) @ w
    initial = float(w @ kh.matrix(nodes) @ w)
    return z, initial


def outer_posterior(
    kh: Kernel,
    schedule: TemperatureSchedule,
    mu: Any,
    Sigma: Any,
    settings: Settings | None = None,
) -> TIPosterior:
    """
    Gaussian posterior over the log-evidence.

    The outer variance splits into the cubature term over temperature and
    the term propagated from the inner covariance:
    var = PiPi[kh] - z^T K^{-1} z  +  z^T K^{-1} Sigma_h K^{-1} z.

    Args:
        kh: Kernel on s = t^(1/5) in [0, 1].
        schedule: Temperatures.
        mu: Inner posterior means of g(t_a).
        Sigma: Inner posterior covariance.
        settings: Jitter policy.

    Returns:
        TIPosterior.
    """
    T = np.asarray(schedule.t)
    mu = np.asarray(mu, dtype=float).reshape(-1)
    Sigma = np.asarray(Sigma, dtype=float)
    if mu.shape != (schedule.m,) or Sigma.shape != (schedule.m, schedule.m):
        raise ArgumentError("mu and Sigma must match the schedule length")
    pi = importance_density(T)
    if np.any(pi <= 0):
        raise ArgumentError("the importance density vanishes at a scheduled temperature")

    h = mu / pi
    Sigma_h = Sigma / np.outer(pi, pi)
    z, initial = outer_kernel_mean(kh, T)
    factor = gram(kh, temperature_coordinate(T)[:, None], settings)
    w = factor.solve(z)

    var_outer = clamp_variance(initial - float(z @ w), initial, settings)
    var_propagated = max(float(w @ Sigma_h @ w), 0.0)
    return TIPosterior(
        schedule=schedule,
        mu=mu,
        cov=Sigma,
        logz_mean=float(w @ h),
        logz_var_outer=var_outer,
        logz_var_propagated=var_propagated,
        trapezium=trapezium_ti(schedule, mu),
    )


def outer_sigma_grid(schedule: TemperatureSchedule, settings: Settings | None = None) -> np.ndarray:
    """EB grid for kh, floored at the smallest node spacing in s."""
    grid = default_sigma_grid(settings)
    floor = float(np.min(np.diff(temperature_coordinate(schedule.t))))
    return np.unique(np.concatenate([[floor], grid[grid > floor]]))


def rung_inflation(
    kf: Kernel,
    rung_samples: list[PointSet],
    f_values: list[Any],
    split: float = 0.5,
    delta: float | None = None,
) -> np.ndarray:
    """
    Per-rung bound on the error of each empirical measure.

    The leading ``split`` share of a rung is a dependent chain, so the
    sample count in the bound is replaced by the effective sample size of
    its log-likelihood trace (repeated states expanded by their counts).
    """
    delta = get_settings().delta if delta is None else delta
    bounds = []
    for X, f in zip(rung_samples, f_values, strict=True):
        values = np.asarray(f, dtype=float).reshape(-1)
        head, _ = split_samples(X, split, mode="head")
        counts = np.rint(head.multiplicities()).astype(int)
        trace = np.repeat(values[: head.n], counts)
        ess = effective_sample_size(trace)
        bounds.append(mean_error_bound(kf, int(counts.sum()), delta, ess=ess))
    return np.array(bounds)


def inflate_diagonal(Sigma: Any, bounds: Any) -> np.ndarray:
    """Replace each standard deviation sqrt(Sigma_aa) by sqrt(Sigma_aa) + b_a."""
    Sigma = np.asarray(Sigma, dtype=float)
    b = np.asarray(bounds, dtype=float).reshape(-1)
    if b.shape != (Sigma.shape[0],) or np.any(b < 0):
        raise ArgumentError("one nonnegative bound is needed per rung")
    sd = np.sqrt(np.maximum(np.diag(Sigma), 0.0))
    return Sigma + np.diag((sd + b) ** 2 - sd**2)


class TIModel(BaseModel):
    """Bayesian model for evidence estimation."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str = "model"
    log_likelihood: LogFunction
    log_prior: LogFunction
    ndim: int = Field(ge=1)
    initial: FloatArray
    log_evidence: float | None = None

    def power_posterior(self, t: float) -> PowerPosterior:
        return PowerPosterior(
            log_likelihood=self.log_likelihood,
            log_prior=self.log_prior,
            t=float(t),
            ndim=self.ndim,
        )


def conjugate_gaussian_model(y: Any, prior_var: float = 1.0, noise_var: float = 1.0) -> TIModel:
    """
    theta ~ N(0, prior_var), y_i ~ N(theta, noise_var), with exact evidence.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size == 0:
        raise ArgumentError("at least one observation is needed")
    k = y.size
    prior_sd, noise_sd = np.sqrt(prior_var), np.sqrt(noise_var)

    def log_likelihood(theta: np.ndarray) -> float:
        return float(stats.norm.logpdf(y, loc=theta[0], scale=noise_sd).sum())

    def log_prior(theta: np.ndarray) -> float:
        return float(stats.norm.logpdf(theta[0], scale=prior_sd))

    cov = noise_var * np.eye(k) + prior_var * np.ones((k, k))
    evidence = float(stats.multivariate_normal.logpdf(y, mean=np.zeros(k), cov=cov))
    return TIModel(
        name="conjugate-gaussian",
        log_likelihood=log_likelihood,
        log_prior=log_prior,
        ndim=1,
        initial=np.zeros(1),
        log_evidence=evidence,
    )


def rung_seeds(seed: int, m: int) -> list[int]:
    """Independent per-rung seeds derived from the master seed."""
    children = np.random.SeedSequence(seed).spawn(m)
    return [int(child.generate_state(1, dtype=np.uint32)[0]) for child in children]


def sample_rungs(
    model: TIModel,
    schedule: TemperatureSchedule,
    n_per_rung: int,
    seed: int,
    step: float = 1.0,
) -> tuple[list[PointSet], list[np.ndarray]]:
    """
    Random-walk Metropolis states and log-likelihood values for every rung.

    The step is tuned per rung and half of n_per_rung is discarded as burn-in.
    """
    samples, values = [], []
    x0 = np.asarray(model.initial)
    for a, (t, rung_seed) in enumerate(zip(schedule.t, rung_seeds(seed, schedule.m), strict=True)):
        target = model.power_posterior(float(t))
        tuned = tune_step(target.log_density, x0, step, rung_seed)
        X = mcmc_points(
            target.log_density, x0, n_per_rung, tuned, rung_seed + 1, burn_in=n_per_rung // 2
        )
        f = np.array([model.log_likelihood(x) for x in np.asarray(X.points)])
        logger.debug(
            f"Rung {a} (t={t:.3e}): {X.n} states, acceptance {X.acceptance_rate or 0.0:.2f}"
        )
        samples.append(X)
        values.append(f)
        x0 = np.asarray(X.points)[-1]
        step = tuned
    return samples, values


def _amplitude(values: np.ndarray, share: float) -> float:
    return max(share * abs(float(np.mean(values))), np.finfo(float).eps)


def run_ti(
    model: TIModel,
    m_rungs: int = 10,
    n_per_rung: int = 200,
    seed: int = 0,
    split: float = 0.5,
    delta: float | None = None,
    settings: Settings | None = None,
) -> TIPosterior:
    """
    Probabilistic thermodynamic integration end to end.

    Samples every power posterior by MCMC, fits ExpQuadratic kernels (EB
    lengthscales; amplitudes 0.1 |mean f| inner and 0.01 |mean h| outer),
    then combines the inner and outer cubature posteriors. The inner
    covariance is widened rung by rung with the empirical-measure bound
    before it is propagated; kh works in s = t^(1/5) with its lengthscale
    no shorter than the node spacing.

    Args:
        model: Log-likelihood and log-prior.
        m_rungs: Number of temperatures.
        n_per_rung: MCMC states per temperature.
        seed: Master seed.
        split: Share of each rung used for its empirical measure.
        delta: Failure probability of the empirical-measure bound.
        settings: Numerical settings.

    Returns:
        TIPosterior with hyperparameters recorded.
    """
    settings = settings or get_settings()
    schedule = default_schedule(m_rungs)
    samples, values = sample_rungs(model, schedule, n_per_rung, seed)
    g_hat = np.array([mc_estimate(f, X.counts)[0] for X, f in zip(samples, values, strict=True)])

    _, X, f = pooled_regression_set(samples, values, split, settings)
    sigma_f, _ = eb_lengthscale(ExpQuadratic(), PointSet(points=X), f, settings=settings)
    kf = ExpQuadratic(sigma=float(sigma_f[0]), lam=_amplitude(f, 0.1))
    mu, Sigma = inner_posterior(kf, samples, values, schedule, split, settings)
    bounds = rung_inflation(kf, samples, values, split, delta)
    Sigma = inflate_diagonal(Sigma, bounds)

    T = np.asarray(schedule.t)
    h = mu / importance_density(T)
    S = PointSet(points=temperature_coordinate(T)[:, None])
    grid = outer_sigma_grid(schedule, settings)
    sigma_h, _ = eb_lengthscale(ExpQuadratic(), S, h, sigma_grid=grid, settings=settings)
    kh = ExpQuadratic(sigma=float(sigma_h[0]), lam=_amplitude(h, 0.01))
    post = outer_posterior(kh, schedule, mu, Sigma, settings)

    hyper = {
        "sigma_f": kf.sigma,
        "lambda_f": kf.lam,
        "sigma_h": kh.sigma,
        "lambda_h": kh.lam,
        "pooled": float(X.shape[0]),
        "inflation_max": float(bounds.max()),
    }
    logger.info(
        f"TI {model.name}: logZ {post.logz_mean:.4f} ± {np.sqrt(post.var_total):.4f} "
        f"(trapezium {trapezium_ti(schedule, g_hat):.4f})"
    )
    return post.model_copy(
        update={"trapezium": trapezium_ti(schedule, g_hat), "hyperparameters": hyper}
    )
