"""
TI Model-Selection Experiment

Variable selection for logistic regression: every small covariate subset
gets a probabilistic thermodynamic-integration posterior over its
log-evidence, and Monte Carlo push-forward of those posteriors gives a
distribution over the model posterior.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger
from scipy.special import softmax

from probcub.app.integration.thermo import run_ti
from probcub.app.models import ExperimentConfig, TIParams, TIPosterior
from probcub.app.services.integrands import (
    candidate_models,
    empty_model_evidence,
    log_model_prior,
    logistic_data,
    logistic_model,
    model_label,
)
from probcub.app.services.tables import plot_lines, ti_rungs_frame, write_csv
from probcub.app.services.workpool import cell_seed, run_cells

EVIDENCE_COLUMNS = [
    "model",
    "size",
    "log_prior",
    "logz_mean",
    "var_outer",
    "var_propagated",
    "var_total",
    "lo",
    "hi",
    "trapezium",
    "sigma_is_approximate",
    "sigma_f",
    "lambda_f",
    "sigma_h",
    "lambda_h",
]


@dataclass(frozen=True)
class ModelResult:
    subset: tuple[int, ...]
    posterior: TIPosterior | None
    exact: float | None = None

    @property
    def label(self) -> str:
        return model_label(self.subset)

    @property
    def mean(self) -> float:
        if self.posterior is not None:
            return self.posterior.logz_mean
        assert self.exact is not None
        return self.exact

    @property
    def variance(self) -> float:
        return 0.0 if self.posterior is None else self.posterior.var_total


def evidence_table(params: TIParams, seed: int = 0, threads: int = 1) -> list[ModelResult]:
    """Log-evidence posterior for every candidate model."""
    X, y = logistic_data(params.n_data, params.covariates, params.true_model, seed)
    subsets = candidate_models(params.covariates, params.max_size)

    def evaluate(k: int) -> ModelResult:
        subset = subsets[k]
        if not subset:
            return ModelResult(subset=subset, posterior=None, exact=empty_model_evidence(y))
        model = logistic_model(X, y, subset, params.prior_precision)
        post = run_ti(model, params.m_rungs, params.n_per_rung, cell_seed(seed, k))
        return ModelResult(subset=subset, posterior=post)

    return run_cells(evaluate, list(range(len(subsets))), threads, "models")


def _evidence_frame(results: list[ModelResult], params: TIParams) -> pd.DataFrame:
    records = []
    for r in results:
        post = r.posterior
        lo, hi = (r.mean, r.mean) if post is None else post.credible_interval(params.gamma)
        hyper = {} if post is None else post.hyperparameters
        records.append(
            {
                "model": r.label,
                "size": len(r.subset),
                "log_prior": log_model_prior(r.subset, params.covariates),
                "logz_mean": r.mean,
                "var_outer": 0.0 if post is None else post.logz_var_outer,
                "var_propagated": 0.0 if post is None else post.logz_var_propagated,
                "var_total": r.variance,
                "lo": lo,
                "hi": hi,
                "trapezium": r.mean if post is None else post.trapezium,
                "sigma_is_approximate": post is not None,
                "sigma_f": hyper.get("sigma_f", np.nan),
                "lambda_f": hyper.get("lambda_f", np.nan),
                "sigma_h": hyper.get("sigma_h", np.nan),
                "lambda_h": hyper.get("lambda_h", np.nan),
            }
        )
    return pd.DataFrame(records, columns=EVIDENCE_COLUMNS)


def model_posterior_draws(
    results: list[ModelResult], covariates: int, draws: int, seed: int
) -> pd.DataFrame:
    """
    Draws from the distribution over the model posterior.

    Each draw samples every log-evidence from its Gaussian posterior, adds
    the log model prior and normalises with a softmax.
    """
    rng = np.random.default_rng(seed)
    means = np.array([r.mean for r in results])
    sds = np.sqrt(np.array([r.variance for r in results]))
    priors = np.array([log_model_prior(r.subset, covariates) for r in results])
    logz = means[None, :] + sds[None, :] * rng.standard_normal((draws, len(results)))
    probs = softmax(logz + priors[None, :], axis=1)
    frame = pd.DataFrame(probs, columns=[r.label for r in results])
    frame.insert(0, "draw", np.arange(draws))
    return frame


def standard_posterior(results: list[ModelResult], covariates: int) -> pd.DataFrame:
    """Model posterior from the trapezium-rule evidences."""
    logz = np.array(
        [r.mean if r.posterior is None else r.posterior.trapezium for r in results], dtype=float
    )
    priors = np.array([log_model_prior(r.subset, covariates) for r in results])
    return pd.DataFrame(
        {
            "model": [r.label for r in results],
            "log_evidence_trapezium": logz,
            "probability": softmax(logz + priors),
        }
    )


def run_ti_experiment(config: ExperimentConfig, params: TIParams) -> dict[str, Path]:
    """
    Write ti_evidence.csv, ti_model_posterior.csv, ti_standard.csv, per-model
    rung tables and a chart of mean model probabilities.
    """
    results = evidence_table(params, config.seed, config.threads)
    evidence = _evidence_frame(results, params)
    draw_seed = cell_seed(config.seed, 2**31)
    draws = model_posterior_draws(results, params.covariates, params.draws, draw_seed)
    standard = standard_posterior(results, params.covariates)

    mean_probs = draws.drop(columns="draw").mean(axis=0)
    best = mean_probs.sort_values(ascending=False).index[:3].tolist()
    logger.info(f"Highest mean posterior probability: {best}")

    out = config.output_dir
    paths = {
        "evidence": write_csv(evidence, out / "ti_evidence.csv"),
        "draws": write_csv(draws, out / "ti_model_posterior.csv"),
        "standard": write_csv(standard, out / "ti_standard.csv"),
    }
    for r in results:
        if r.posterior is not None:
            paths[f"rungs_{r.label}"] = write_csv(
                ti_rungs_frame(r.posterior), out / "rungs" / f"ti_rungs_{r.label}.csv"
            )
    index = np.arange(len(results), dtype=float)
    paths["plot"] = plot_lines(
        out / "ti_model_posterior.svg",
        {
            "probabilistic TI (mean)": (index, mean_probs.to_numpy()),
            "standard TI": (index, standard["probability"].to_numpy()),
        },
        "model index",
        "posterior probability",
        "model posterior",
    )
    return paths
