"""
Coverage Experiment

Frequentist coverage of Bayesian Monte Carlo credible intervals for the
oscillatory test functions on [-5, 5]^d: Matern kernel, empirical-Bayes
lengthscale, amplitude marginalised (Student-t) or plugged in (Gaussian).
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from probcub.app.errors import ConditioningError
from probcub.app.integration.cubature import bc_posterior_eb
from probcub.app.integration.kernels import MaternTP
from probcub.app.integration.measures import UniformBox
from probcub.app.integration.pointsets import mc_points
from probcub.app.models import CoverageParams, ExperimentConfig
from probcub.app.services.integrands import oscillatory_function, oscillatory_truth
from probcub.app.services.tables import plot_lines, write_csv
from probcub.app.services.workpool import cell_seed, run_cells

COLUMNS = ["test_fn", "d", "n", "gamma", "replicates", "coverage"]
BOX = (-5.0, 5.0)


@dataclass(frozen=True)
class Replicate:
    fn_index: int
    test_fn: str
    n: int
    replicate: int


def sigma_grid(params: CoverageParams) -> np.ndarray:
    decades = np.log10(params.sigma_hi / params.sigma_lo)
    count = int(round(decades * params.eb_points_per_decade)) + 1
    return np.logspace(np.log10(params.sigma_lo), np.log10(params.sigma_hi), count)


def _replicate(
    params: CoverageParams, cell: Replicate, truth: float, seed: int
) -> list[bool] | None:
    measure = UniformBox.cube(*BOX, params.d)
    X = mc_points(measure, cell.n, cell_seed(seed, cell.fn_index, cell.n, cell.replicate))
    f = oscillatory_function(cell.test_fn)(np.asarray(X.points))
    try:
        post, _ = bc_posterior_eb(
            MaternTP(alpha=params.alpha),
            measure,
            X,
            f,
            sigma_grid=sigma_grid(params),
            marginalise=params.lambda_mode == "marginal",
        )
    except ConditioningError as exc:
        logger.warning(f"{cell.test_fn} n={cell.n} replicate {cell.replicate} skipped: {exc}")
        return None
    hits = []
    for gamma in params.gamma_grid:
        lo, hi = post.credible_interval(gamma)
        hits.append(bool(lo <= truth <= hi))
    return hits


def coverage_table(params: CoverageParams, seed: int = 0, threads: int = 1) -> pd.DataFrame:
    """
    Coverage fraction per (test function, n, gamma).

    Replicates that fail to condition are dropped from the denominator and
    the ``replicates`` column reports the number actually used.
    """
    truths = {name: oscillatory_truth(name, params.d, *BOX) for name in params.test_fns}
    cells = [
        Replicate(fn_index=i, test_fn=name, n=n, replicate=r)
        for i, name in enumerate(params.test_fns)
        for n in params.n_grid
        for r in range(params.replicate_count)
    ]
    hits = run_cells(
        lambda cell: _replicate(params, cell, truths[cell.test_fn], seed),
        cells,
        threads,
        "coverage replicates",
    )

    records = []
    for name in params.test_fns:
        for n in params.n_grid:
            used = [
                h for cell, h in zip(cells, hits, strict=True)
                if cell.test_fn == name and cell.n == n and h is not None
            ]
            for j, gamma in enumerate(params.gamma_grid):
                covered = sum(h[j] for h in used)
                records.append(
                    {
                        "test_fn": name,
                        "d": params.d,
                        "n": n,
                        "gamma": gamma,
                        "replicates": len(used),
                        "coverage": covered / len(used) if used else float("nan"),
                    }
                )
    return pd.DataFrame(records, columns=COLUMNS)


def run_coverage(config: ExperimentConfig, params: CoverageParams) -> dict[str, Path]:
    """Write coverage.csv and the calibration chart coverage.svg."""
    table = coverage_table(params, config.seed, config.threads)
    series = {
        f"{fn} n={n}": (1.0 - rows["gamma"].to_numpy(), rows["coverage"].to_numpy())
        for (fn, n), rows in table.groupby(["test_fn", "n"], sort=False)
    }
    out = config.output_dir
    return {
        "table": write_csv(table, out / "coverage.csv"),
        "plot": plot_lines(
            out / "coverage.svg",
            series,
            "notional coverage 1 - gamma",
            "empirical coverage",
            f"d={params.d}, lambda {params.lambda_mode}",
            diagonal=True,
        ),
    }
