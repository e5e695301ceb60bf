"""
Single-Integral Estimate

General entry point: one integrand, one measure, one set of states, one
posterior. Hyperparameters left unset are chosen from the data (lengthscale
by empirical Bayes, amplitude marginalised). Pairs without a closed-form
kernel mean fall back to an empirical kernel mean when allowed.
"""

from collections.abc import Callable, Iterator
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger
from scipy import stats

from probcub.app.errors import ArgumentError, UnsupportedPairError
from probcub.app.integration.cubature import (
    bc_posterior,
    bc_posterior_studentt,
    eb_lengthscale,
    mc_estimate,
)
from probcub.app.integration.kernelmeans import KernelMean, analytic_mean, empirical_mean
from probcub.app.integration.kernels import ExpQuadratic, Kernel, MaternTP
from probcub.app.integration.measures import GaussianMixture, Measure, UniformBox, sample
from probcub.app.integration.pointsets import (
    digital_net,
    mc_points,
    mcmc_points,
    pointset_from_array,
    tune_step,
)
from probcub.app.models import (
    CubaturePosterior,
    EstimateParams,
    EstimateReport,
    ExperimentConfig,
    PointSet,
)
from probcub.app.services.external import ExternalIntegrand
from probcub.app.services.integrands import (
    OSCILLATION_CONSTANTS,
    oscillatory_function,
    oscillatory_truth,
)
from probcub.app.services.tables import write_csv, write_json
from probcub.app.services.workpool import cell_seed

# Keeps inverse-CDF mapped net points finite.
NET_MARGIN = 1e-12


def build_measure(params: EstimateParams) -> Measure:
    if params.measure == "gaussian":
        return GaussianMixture.standard_normal(params.d)
    return UniformBox.cube(params.lo, params.hi, params.d)


def build_kernel(params: EstimateParams, sigma: float | np.ndarray | None = None) -> Kernel:
    """Kernel with the given (or configured) lengthscale and unit amplitude."""
    sigma = params.sigma if sigma is None else sigma
    if params.kernel == "expquad":
        return ExpQuadratic(sigma=float(np.asarray(sigma if sigma is not None else 1.0).max()))
    return MaternTP(alpha=params.alpha, sigma=sigma if sigma is not None else 1.0)


def read_points(path: Path, d: int) -> np.ndarray:
    """
    States from a CSV file with a header row, or a whitespace-separated text
    file without one. Lines starting with ``#`` are ignored.
    """
    try:
        if path.suffix.lower() == ".csv":
            frame = pd.read_csv(path, comment="#")
        else:
            frame = pd.read_csv(path, comment="#", sep=r"\s+", header=None)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ArgumentError(f"cannot parse points file {path}: {exc}") from exc
    points = frame.to_numpy(dtype=float)
    if points.ndim != 2 or points.shape[1] != d:
        raise ArgumentError(f"{path}: expected {d} columns, got {points.shape[1]}")
    return points


def generate_states(params: EstimateParams, measure: Measure, seed: int) -> PointSet:
    """States from the configured generator; n = 0 gives the empty set."""
    if params.generator == "file":
        if params.points_file is None:
            raise ArgumentError("generator 'file' needs points_file")
        return pointset_from_array(read_points(params.points_file, params.d))
    if params.n == 0:
        return PointSet.empty(params.d)

    if params.generator == "mc":
        return mc_points(measure, params.n, seed)

    if params.generator == "qmc":
        m = int(np.log2(params.n))
        if 2**m != params.n:
            raise ArgumentError(f"qmc needs n to be a power of two, got {params.n}")
        net = digital_net(params.d, m)
        unit = np.asarray(net.points)
        if isinstance(measure, UniformBox):
            points = measure.lo_array + (measure.hi_array - measure.lo_array) * unit
        else:
            points = stats.norm.ppf(np.clip(unit, NET_MARGIN, 1.0 - NET_MARGIN))
        return PointSet(points=points, provenance=net.provenance)

    reflect = None
    if isinstance(measure, UniformBox):
        reflect = (measure.lo_array, measure.hi_array)
        x0 = 0.5 * (measure.lo_array + measure.hi_array)
        step = 0.25 * float(np.min(measure.hi_array - measure.lo_array))
    else:
        x0 = np.zeros(params.d)
        step = 1.0
    step = tune_step(measure.log_density, x0, step, cell_seed(seed, 0), reflect=reflect)
    return mcmc_points(
        measure.log_density, x0, params.n, step, seed, reflect=reflect, burn_in=params.n // 2
    )


@contextmanager
def open_integrand(params: EstimateParams) -> Iterator[Callable[[np.ndarray], np.ndarray]]:
    """Yield the integrand; an external evaluator is shut down on exit."""
    if params.integrand == "external":
        if not params.command:
            raise ArgumentError("integrand 'external' needs a command")
        with ExternalIntegrand(params.command) as evaluator:
            yield evaluator
        return
    if params.integrand not in OSCILLATION_CONSTANTS:
        raise ArgumentError(f"unknown integrand {params.integrand!r}")
    yield oscillatory_function(params.integrand)


def kernel_mean(
    kernel: Kernel, measure: Measure, params: EstimateParams, seed: int
) -> KernelMean:
    """Closed-form kernel mean, or an empirical one on fresh draws if allowed."""
    try:
        return analytic_mean(kernel, measure)
    except UnsupportedPairError:
        if not params.empirical_fallback:
            raise
    logger.warning(
        f"No closed-form mean for ({kernel.name}, {measure.name}); "
        f"using {params.empirical_m} draws"
    )
    return empirical_mean(kernel, sample(measure, params.empirical_m, cell_seed(seed, 1)))


def reference_value(params: EstimateParams) -> float | None:
    """Exact integral of a built-in integrand under the uniform measure, if cheap."""
    if params.integrand not in OSCILLATION_CONSTANTS or params.measure != "uniform":
        return None
    if params.d > 3:
        return None
    return oscillatory_truth(params.integrand, params.d, params.lo, params.hi)


def estimate_report(params: EstimateParams, seed: int = 0) -> EstimateReport:
    """Posterior over one integral with everything needed to reproduce it."""
    measure = build_measure(params)
    X = generate_states(params, measure, seed)
    with open_integrand(params) as integrand:
        f = integrand(np.asarray(X.points)) if X.n else np.zeros(0)

    hyper: dict[str, float] = {}
    sigma: float | np.ndarray | None = params.sigma
    if sigma is None and X.n >= 2:
        sigmas, lml = eb_lengthscale(build_kernel(params, 1.0), X, f)
        sigma = sigmas
        hyper["log_marginal_likelihood"] = lml
    kernel0 = build_kernel(params, sigma)
    hyper["sigma"] = float(np.asarray(sigma if sigma is not None else 1.0).max())

    post: CubaturePosterior
    if params.lam is None and X.n >= 2:
        post = bc_posterior_studentt(kernel0, kernel_mean(kernel0, measure, params, seed), X, f)
    else:
        lam = 1.0 if params.lam is None else params.lam
        hyper["lam"] = lam
        kernel = kernel0.with_amplitude(lam)
        post = bc_posterior(kernel, kernel_mean(kernel, measure, params, seed), X, f)

    lo, hi = post.credible_interval(params.gamma)
    mc_mean, mc_stderr = mc_estimate(f, X.counts) if X.n else (None, None)
    report = EstimateReport(
        integrand=params.integrand,
        kernel=kernel0.name,
        measure=measure.name,
        n=X.n,
        dropped=X.dropped,
        mean=post.mean,
        variance=post.variance,
        family=post.family.value,
        dof=post.dof,
        gamma=params.gamma,
        lo=lo,
        hi=hi,
        hyperparameters=hyper,
        jitter=post.jitter,
        kernel_mean_form=post.kernel_mean_form.value,
        inflation=post.inflation,
        delta=post.delta,
        mc_mean=mc_mean,
        mc_stderr=mc_stderr,
        truth=reference_value(params),
    )
    logger.info(
        f"{params.integrand}: {report.family} posterior mean {report.mean:.6e}, "
        f"{100 * (1 - params.gamma):g}% interval [{lo:.6e}, {hi:.6e}]"
    )
    return report


def run_estimate(config: ExperimentConfig, params: EstimateParams) -> dict[str, Path]:
    """Write estimate.json and a one-row estimate.csv."""
    report = estimate_report(params, config.seed)
    row = report.model_dump(exclude={"hyperparameters"})
    row.update({f"hyper_{key}": value for key, value in report.hyperparameters.items()})
    out = config.output_dir
    return {
        "report": write_json(report, out / "estimate.json"),
        "table": write_csv(pd.DataFrame([row]), out / "estimate.csv"),
    }
