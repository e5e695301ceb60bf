"""
Bayesian Cubature

Cubature weights, Gaussian and Student-t posteriors over an integral,
worst-case errors, empirical-Bayes lengthscale selection, and the inflated
posterior used with empirical kernel means.
"""

from typing import Any

import numpy as np
from loguru import logger
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from probcub.app.config import Settings, get_settings
from probcub.app.errors import ArgumentError, ConditioningError, UnsupportedOperationError
from probcub.app.integration.kernelmeans import KernelMean, analytic_mean, mean_error_bound
from probcub.app.integration.kernels import Kernel, MaternTP, gram
from probcub.app.integration.linalg import GramFactor
from probcub.app.integration.measures import Measure
from probcub.app.models import (
    CubaturePosterior,
    CubatureWeights,
    KernelMeanForm,
    PointSet,
    PosteriorFamily,
    as_points,
)


def _same_kernel(a: Kernel, b: Kernel) -> bool:
    return type(a) is type(b) and a.model_dump() == b.model_dump()


def _check_inputs(
    kernel: Kernel, km: KernelMean, X: PointSet, f_values: Any = None
) -> np.ndarray | None:
    if not _same_kernel(kernel, km.kernel):
        raise ArgumentError(f"kernel mean was built for a different kernel ({km.kernel!r})")
    if f_values is None:
        return None
    f = np.asarray(f_values, dtype=float).reshape(-1)
    if f.shape != (X.n,):
        raise ArgumentError(f"got {f.size} function values for {X.n} states")
    if not np.all(np.isfinite(f)):
        raise ArgumentError("function values must be finite")
    return f


def clamp_variance(value: float, scale: float, settings: Settings | None = None) -> float:
    """
    Clamp a round-off negative variance to zero.

    Values in [-rel * scale, 0) become 0 with a warning; anything lower is a
    conditioning failure.
    """
    if value >= 0:
        return float(value)
    settings = settings or get_settings()
    if value >= -settings.variance_clamp_rel * scale:
        logger.warning(f"Clamped negative posterior variance {value:.3e} to 0")
        return 0.0
    logger.error(f"Posterior variance {value:.3e} is far below zero (scale {scale:.3e})")
    raise ConditioningError(f"negative posterior variance {value:.3e}")


def _weights(
    kernel: Kernel, km: KernelMean, X: PointSet, settings: Settings | None
) -> tuple[GramFactor, np.ndarray, np.ndarray]:
    z = km.mean_vector(X)
    factor = gram(kernel, X, settings)
    return factor, z, factor.solve(z)


def bc_weights(
    kernel: Kernel, km: KernelMean, X: PointSet, settings: Settings | None = None
) -> CubatureWeights:
    """
    Bayesian cubature weights w = K^{-1} z with z_i = mu(x_i).

    Args:
        kernel: Kernel the kernel mean was built for.
        km: Kernel mean.
        X: Deduplicated states.
        settings: Jitter policy.

    Returns:
        CubatureWeights with the kernel-mean vector and the jitter used.

    Raises:
        ConditioningError: If the Gram matrix cannot be factorised.
    """
    _check_inputs(kernel, km, X)
    factor, z, w = _weights(kernel, km, X, settings)
    return CubatureWeights(weights=w, z=z, jitter=factor.jitter)


def bc_posterior(
    kernel: Kernel,
    km: KernelMean,
    X: PointSet,
    f_values: Any,
    settings: Settings | None = None,
) -> CubaturePosterior:
    """
    Gaussian posterior over the integral given f at the states.

    Mean w^T f and variance PiPi[k] - z^T K^{-1} z. An empirical kernel mean
    is routed through ``approx_bc_posterior`` with the default delta.

    Args:
        kernel: Kernel (with its amplitude).
        km: Kernel mean of ``kernel``.
        X: States; n = 0 gives the prior Gaussian(0, PiPi[k]).
        f_values: Integrand values aligned with X.
        settings: Tolerances.

    Returns:
        Gaussian CubaturePosterior.
    """
    if km.form == KernelMeanForm.EMPIRICAL:
        return approx_bc_posterior(kernel, km, X, f_values, settings=settings)
    f = _check_inputs(kernel, km, X, f_values)
    assert f is not None
    initial = km.initial_error()
    if X.n == 0:
        return CubaturePosterior(mean=0.0, variance=initial, weights=np.zeros(0), n=0)

    factor, z, w = _weights(kernel, km, X, settings)
    variance = clamp_variance(initial - float(z @ w), initial, settings)
    return CubaturePosterior(
        mean=float(w @ f),
        variance=variance,
        weights=w,
        n=X.n,
        jitter=factor.jitter,
    )


def eb_amplitude(
    kernel0: Kernel, X: PointSet, f_values: Any, settings: Settings | None = None
) -> float:
    """Empirical-Bayes amplitude f^T C_0^{-1} f / n for the unit-amplitude kernel."""
    f = np.asarray(f_values, dtype=float).reshape(-1)
    if X.n == 0:
        raise ArgumentError("the amplitude needs at least one state")
    return gram(kernel0, X, settings).quad_form(f) / X.n


def bc_posterior_studentt(
    kernel0: Kernel,
    km0: KernelMean,
    X: PointSet,
    f_values: Any,
    delta: float | None = None,
    settings: Settings | None = None,
) -> CubaturePosterior:
    """
    Student-t posterior with the amplitude marginalised under p(lam) ∝ 1/lam.

    Mean as in ``bc_posterior``; squared scale
    (f^T C_0^{-1} f / n) (PiPi[c_0] - z^T C_0^{-1} z); n degrees of freedom.
    With an empirical kernel mean the unit-amplitude variance is inflated by
    the kernel-mean error bound before scaling.

    Raises:
        ArgumentError: If n < 2 or the kernel's amplitude is not 1.
    """
    if X.n < 2:
        raise ArgumentError("the Student-t posterior needs at least two states")
    if kernel0.amplitude != 1.0:
        raise ArgumentError("marginalisation expects the unit-amplitude kernel c_0")
    f = _check_inputs(kernel0, km0, X, f_values)
    assert f is not None

    empirical = km0.form == KernelMeanForm.EMPIRICAL
    if empirical:
        _check_disjoint(km0, X)
    factor, z, w = _weights(kernel0, km0, X, settings)
    initial = km0.initial_error()
    variance0 = clamp_variance(initial - float(z @ w), initial, settings)
    lam_hat = factor.quad_form(f) / X.n

    inflation = None
    if empirical:
        settings = settings or get_settings()
        delta = settings.delta if delta is None else delta
        bound = mean_error_bound(kernel0, _sample_size(km0), delta)
        variance0 = (np.sqrt(variance0) + bound) ** 2
        inflation = float(np.sqrt(max(lam_hat, 0.0)) * bound)

    return CubaturePosterior(
        mean=float(w @ f),
        variance=max(lam_hat, 0.0) * variance0,
        family=PosteriorFamily.STUDENT_T,
        dof=X.n,
        weights=w,
        n=X.n,
        jitter=factor.jitter,
        inflation=inflation,
        kernel_mean_form=km0.form,
        delta=delta if empirical else None,
    )


def wce_squared(
    kernel: Kernel, km: KernelMean, X: PointSet, w: Any, settings: Settings | None = None
) -> float:
    """
    Squared worst-case error w^T K w - 2 w^T z + PiPi[k] of the rule (X, w).

    Negative round-off goes through clamp_variance, relative to the size of
    the terms being cancelled.
    """
    _check_inputs(kernel, km, X)
    weights = np.asarray(w, dtype=float).reshape(-1)
    if weights.shape != (X.n,):
        raise ArgumentError(f"got {weights.size} weights for {X.n} states")
    initial = km.initial_error()
    if X.n == 0:
        return initial
    K = kernel.matrix(X)
    z = km.mean_vector(X)
    quad = float(weights @ K @ weights)
    value = quad - 2.0 * float(weights @ z) + initial
    return clamp_variance(value, abs(quad) + initial, settings)


def log_marginal_likelihood(
    kernel0: Kernel, X: PointSet, f_values: Any, settings: Settings | None = None
) -> float:
    """
    Amplitude-profiled log marginal likelihood, up to a constant.

    -(n/2) log(f^T C_0^{-1} f) - (1/2) log det C_0.

    Raises:
        ArgumentError: If f vanishes at every state; the profiled amplitude
            is then 0 and the likelihood is unbounded in every lengthscale.
    """
    f = np.asarray(f_values, dtype=float).reshape(-1)
    if not np.any(f):
        raise ArgumentError("the integrand is zero at every state; its likelihood is unbounded")
    factor = gram(kernel0, X, settings)
    quad = factor.quad_form(f)
    if quad <= 0:
        raise ConditioningError(f"nonpositive quadratic form {quad:.3e} for a nonzero integrand")
    return float(-0.5 * X.n * np.log(quad) - 0.5 * factor.logdet())


def default_sigma_grid(settings: Settings | None = None) -> np.ndarray:
    """Log-spaced lengthscale grid from the settings."""
    settings = settings or get_settings()
    decades = np.log10(settings.eb_grid_hi / settings.eb_grid_lo)
    count = int(round(decades * settings.eb_points_per_decade)) + 1
    return np.logspace(np.log10(settings.eb_grid_lo), np.log10(settings.eb_grid_hi), count)


def _eb_subset(X: PointSet, f: np.ndarray, cap: int) -> tuple[PointSet, np.ndarray]:
    if X.n <= cap:
        return X, f
    idx = np.unique(np.linspace(0, X.n - 1, cap).round().astype(int))
    return X.take(idx), f[idx]


def _search_1d(
    objective: Any, grid: np.ndarray, rtol: float
) -> tuple[float, float]:
    values = np.array([objective(s) for s in grid])
    if not np.any(np.isfinite(values)):
        raise ConditioningError("every lengthscale on the EB grid is numerically singular")
    values = np.where(np.isnan(values), -np.inf, values)
    best = int(np.argmax(values))
    sigma, value = float(grid[best]), float(values[best])
    if 0 < best < len(grid) - 1:
        result = minimize_scalar(
            lambda log_s: -objective(float(np.exp(log_s))),
            bounds=(np.log(grid[best - 1]), np.log(grid[best + 1])),
            method="bounded",
            options={"xatol": rtol},
        )
        if result.success and -result.fun > value:
            sigma, value = float(np.exp(result.x)), float(-result.fun)
    return sigma, value


def eb_lengthscale(
    kernel_family: Kernel,
    X: PointSet,
    f_values: Any,
    sigma_grid: Any | None = None,
    per_dimension: bool = False,
    settings: Settings | None = None,
) -> tuple[np.ndarray, float]:
    """
    Empirical-Bayes lengthscale with the amplitude profiled out.

    Maximises the profiled log marginal likelihood on a log-spaced grid, then
    refines between the neighbouring grid points with a bounded Brent
    search. In per-dimension mode (MaternTP) the isotropic optimum is
    followed by one coordinate sweep. At most ``eb_max_points`` evenly
    spaced states are used.

    Args:
        kernel_family: Kernel whose lengthscale is free (its amplitude is ignored).
        X: States.
        f_values: Integrand values.
        sigma_grid: Positive grid (default from the settings).
        per_dimension: Fit one lengthscale per coordinate.
        settings: Grid and tolerance settings.

    Returns:
        Tuple of (lengthscales, profiled log marginal likelihood).

    Raises:
        ArgumentError: If the integrand is zero at every state used for the fit.
        ConditioningError: If every grid point is numerically singular.
    """
    settings = settings or get_settings()
    grid = default_sigma_grid(settings) if sigma_grid is None else np.sort(
        np.asarray(sigma_grid, dtype=float).reshape(-1)
    )
    if grid.size == 0 or np.any(grid <= 0):
        raise ArgumentError("the lengthscale grid must be nonempty and positive")
    f = np.asarray(f_values, dtype=float).reshape(-1)
    if f.shape != (X.n,):
        raise ArgumentError(f"got {f.size} function values for {X.n} states")
    Xs, fs = _eb_subset(X, f, settings.eb_max_points)
    if not np.any(fs):
        raise ArgumentError(
            "the integrand is zero at every EB state, so no lengthscale is preferred; "
            "fix the lengthscale instead"
        )
    base = kernel_family.with_amplitude(1.0)

    def objective_for(make: Any) -> Any:
        def objective(s: float) -> float:
            try:
                return log_marginal_likelihood(make(s), Xs, fs, settings)
            except ConditioningError:
                logger.debug(f"EB skipped singular lengthscale {s:.4g}")
                return float("-inf")

        return objective

    sigma, value = _search_1d(objective_for(base.with_lengthscale), grid, settings.eb_rtol)
    sigmas = np.array([sigma])

    if per_dimension:
        if not isinstance(base, MaternTP):
            raise UnsupportedOperationError("per-dimension lengthscales need MaternTP")
        sigmas = np.full(X.dim, sigma)
        for i in range(X.dim):

            def make(s: float, i: int = i) -> Kernel:
                trial = sigmas.copy()
                trial[i] = s
                return base.with_lengthscale(trial)

            sigmas[i], value = _search_1d(objective_for(make), grid, settings.eb_rtol)

    logger.debug(f"EB lengthscale {np.array2string(sigmas, precision=4)}, lml {value:.4f}")
    return sigmas, value


def bc_posterior_eb(
    kernel_family: Kernel,
    measure: Measure,
    X: PointSet,
    f_values: Any,
    sigma_grid: Any | None = None,
    marginalise: bool = True,
    settings: Settings | None = None,
) -> tuple[CubaturePosterior, Kernel]:
    """
    Posterior with hyperparameters chosen from the data.

    The lengthscale is always the EB value; the amplitude is marginalised
    (Student-t) or plugged in at its EB value (Gaussian).

    Returns:
        Tuple of (posterior, kernel used).
    """
    sigma, _ = eb_lengthscale(kernel_family, X, f_values, sigma_grid, settings=settings)
    kernel0 = kernel_family.with_lengthscale(sigma).with_amplitude(1.0)
    km0 = analytic_mean(kernel0, measure)
    if marginalise:
        return bc_posterior_studentt(kernel0, km0, X, f_values, settings=settings), kernel0
    lam = eb_amplitude(kernel0, X, f_values, settings)
    kernel = kernel0.with_amplitude(max(lam, np.finfo(float).tiny))
    km = analytic_mean(kernel, measure)
    return bc_posterior(kernel, km, X, f_values, settings), kernel


def _sample_size(km: KernelMean) -> float:
    assert km.samples is not None
    return float(km.samples.multiplicities().sum())


def _check_disjoint(km: KernelMean, X: PointSet) -> None:
    if km.samples is None or X.n == 0:
        return
    tol = get_settings().dedup_tol
    distances, _ = cKDTree(np.asarray(km.samples.points)).query(as_points(X), p=np.inf)
    if np.any(distances <= tol):
        raise ArgumentError("empirical kernel-mean samples overlap the cubature states")


def approx_bc_posterior(
    kernel: Kernel,
    km_emp: KernelMean,
    X: PointSet,
    f_values: Any,
    delta: float | None = None,
    ess: float | None = None,
    settings: Settings | None = None,
) -> CubaturePosterior:
    """
    Gaussian posterior from an empirical kernel mean, with inflated variance.

    The variance is (sqrt(v_a) + b)^2 where v_a is the posterior variance with
    respect to the empirical measure and b the kernel-mean error bound at
    level delta; ``inflation`` holds b.

    Args:
        kernel: Kernel.
        km_emp: Empirical kernel mean built from samples disjoint from X.
        X: States.
        f_values: Integrand values.
        delta: Failure probability of the bound (default from the settings).
        ess: Effective sample size replacing the sample count in the bound.
        settings: Tolerances.

    Raises:
        ArgumentError: On overlapping samples or delta outside (0, 1).
    """
    if km_emp.form != KernelMeanForm.EMPIRICAL:
        raise ArgumentError("approx_bc_posterior needs an empirical kernel mean")
    settings = settings or get_settings()
    delta = settings.delta if delta is None else delta
    if not 0.0 < delta < 1.0:
        raise ArgumentError(f"delta must lie in (0, 1), got {delta}")
    f = _check_inputs(kernel, km_emp, X, f_values)
    assert f is not None
    _check_disjoint(km_emp, X)

    bound = mean_error_bound(kernel, int(_sample_size(km_emp)), delta, ess=ess)
    initial = km_emp.initial_error()
    if X.n == 0:
        variance, w, mean, jitter = initial, np.zeros(0), 0.0, 0.0
    else:
        factor, z, w = _weights(kernel, km_emp, X, settings)
        variance = clamp_variance(initial - float(z @ w), initial, settings)
        mean, jitter = float(w @ f), factor.jitter

    return CubaturePosterior(
        mean=mean,
        variance=float((np.sqrt(variance) + bound) ** 2),
        weights=w,
        n=X.n,
        jitter=jitter,
        inflation=bound,
        kernel_mean_form=KernelMeanForm.EMPIRICAL,
        delta=delta,
    )


def credible_interval(post: CubaturePosterior, gamma: float) -> tuple[float, float]:
    """Central 100(1 - gamma)% interval from Gaussian or Student-t quantiles."""
    return post.credible_interval(gamma)


def mc_estimate(f_values: Any, counts: Any | None = None) -> tuple[float, float]:
    """
    Equal-weight (MC/QMC) estimate with its CLT standard error.

    Args:
        f_values: Integrand values.
        counts: Optional multiplicities (repeated MCMC states).

    Returns:
        Tuple of (mean, standard error).
    """
    f = np.asarray(f_values, dtype=float).reshape(-1)
    if f.size == 0:
        raise ArgumentError("the MC estimate needs at least one value")
    c = np.ones_like(f) if counts is None else np.asarray(counts, dtype=float).reshape(-1)
    total = c.sum()
    mean = float(c @ f / total)
    if total < 2:
        return mean, float("inf")
    var = float(c @ (f - mean) ** 2 / (total - 1))
    return mean, float(np.sqrt(var / total))
