"""
Convergence Experiment

Worst-case error of Bayesian cubature (and of the equal-weight rule on the
same states) against n, with fixed hyperparameters, and the fitted log-log
slope per kernel, smoothness and generator.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from probcub.app.config import get_settings
from probcub.app.errors import ArgumentError, ConditioningError
from probcub.app.integration.cubature import bc_weights, wce_squared
from probcub.app.integration.kernelmeans import analytic_mean
from probcub.app.integration.kernels import Kernel, MaternTP, SphereSobolev32, WeightedSobolev
from probcub.app.integration.measures import Measure, UniformBox, UniformSphere
from probcub.app.integration.pointsets import (
    design_files,
    digital_net,
    load_sphere_design,
    mc_points,
    spherical_fibonacci,
)
from probcub.app.models import ConvergenceParams, ExperimentConfig, PointSet
from probcub.app.services.tables import plot_lines, write_csv
from probcub.app.services.workpool import cell_seed, run_cells

COLUMNS = ["kernel", "alpha", "generator", "d", "n", "wce", "jitter_used"]
# Below this share of the initial error the variance is round-off.
VARIANCE_FLOOR = 1e-10


@dataclass(frozen=True)
class Cell:
    index: int
    alpha: float
    generator: str


def _kernel_and_measure(params: ConvergenceParams, alpha: float) -> tuple[Kernel, Measure]:
    if params.kernel == "matern":
        return MaternTP(alpha=alpha, sigma=params.sigma, lam=params.lam), UniformBox.unit(params.d)
    if params.kernel == "sobolev":
        if alpha != int(alpha):
            raise ArgumentError(f"Sobolev smoothness must be an integer, got {alpha}")
        return WeightedSobolev.order_two(params.d, int(alpha)), UniformBox.unit(params.d)
    if params.d != 3:
        raise ArgumentError("the sphere kernel lives in d = 3")
    return SphereSobolev32(), UniformSphere()


def _point_sets(params: ConvergenceParams, cell: Cell, seed: int) -> list[PointSet]:
    gen = cell.generator
    if params.kernel == "sphere":
        if gen == "design":
            return [load_sphere_design(p) for p in design_files(get_settings().design_dir)]
        if gen == "fibonacci":
            return [spherical_fibonacci(n) for n in params.n_grid]
        if gen == "mc":
            return [
                mc_points(UniformSphere(), n, cell_seed(seed, cell.index, n))
                for n in params.n_grid
            ]
        raise ArgumentError(f"generator {gen!r} does not produce sphere states")

    if gen == "qmc":
        return [digital_net(params.d, m, params.order) for m in params.m_grid]
    if gen == "mc":
        measure = UniformBox.unit(params.d)
        return [mc_points(measure, 2**m, cell_seed(seed, cell.index, m)) for m in params.m_grid]
    raise ArgumentError(f"generator {gen!r} does not produce box states")


def _rows(params: ConvergenceParams, cell: Cell, seed: int) -> list[dict[str, object]]:
    kernel, measure = _kernel_and_measure(params, cell.alpha)
    km = analytic_mean(kernel, measure)
    initial = km.initial_error()
    rows: list[dict[str, object]] = []
    base = {"kernel": params.kernel, "alpha": cell.alpha, "d": params.d}

    for X in _point_sets(params, cell, seed):
        try:
            weights = bc_weights(kernel, km, X)
            variance = initial - float(weights.z @ weights.weights)
            jitter = weights.jitter
        except ConditioningError as exc:
            logger.warning(f"{params.kernel} alpha={cell.alpha} n={X.n}: {exc}")
            variance, jitter = float("nan"), float("nan")
        if not variance >= VARIANCE_FLOOR * initial:
            logger.warning(
                f"{params.kernel} alpha={cell.alpha} {cell.generator} n={X.n}: "
                f"variance {variance:.3e} is at the round-off floor; row flagged"
            )
            wce = float("nan")
        else:
            wce = float(np.sqrt(variance))
        rows.append(
            {**base, "generator": cell.generator, "n": X.n, "wce": wce, "jitter_used": jitter}
        )

        if params.uniform_rows:
            uniform = np.full(X.n, 1.0 / X.n)
            rows.append(
                {
                    **base,
                    "generator": f"{cell.generator}+uniform",
                    "n": X.n,
                    "wce": float(np.sqrt(wce_squared(kernel, km, X, uniform))),
                    "jitter_used": 0.0,
                }
            )
    return rows


def fit_slopes(table: pd.DataFrame, min_n: int = 1) -> pd.DataFrame:
    """
    Least-squares slope of log wce against log n per (kernel, alpha, generator).

    Flagged rows (wce = nan) and rows with n < min_n are left out.
    """
    records = []
    for (kernel, alpha, generator, d), rows in table.groupby(
        ["kernel", "alpha", "generator", "d"], sort=False
    ):
        usable = rows[np.isfinite(rows["wce"]) & (rows["wce"] > 0) & (rows["n"] >= min_n)]
        slope = float("nan")
        if len(usable) >= 2:
            slope = float(np.polyfit(np.log(usable["n"]), np.log(usable["wce"]), 1)[0])
        records.append(
            {
                "kernel": kernel,
                "alpha": alpha,
                "generator": generator,
                "d": d,
                "slope": slope,
                "points": len(usable),
            }
        )
    return pd.DataFrame(records)


def convergence_table(
    params: ConvergenceParams, seed: int = 0, threads: int = 1
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """
    WCE rows and fitted slopes.

    Returns:
        Tuple of (rows with the convergence CSV columns, slope table).
    """
    alphas = [3.0 / 2.0] if params.kernel == "sphere" else params.alphas
    cells = [
        Cell(index=i, alpha=alpha, generator=gen)
        for i, (alpha, gen) in enumerate((a, g) for a in alphas for g in params.generators)
    ]
    results = run_cells(lambda cell: _rows(params, cell, seed), cells, threads, "convergence cells")
    table = pd.DataFrame([row for rows in results for row in rows], columns=COLUMNS)
    slopes = fit_slopes(table, params.slope_min_n)
    for row in slopes.itertuples():
        logger.info(f"{row.kernel} alpha={row.alpha} {row.generator}: slope {row.slope:.3f}")
    return table, slopes


def run_convergence(config: ExperimentConfig, params: ConvergenceParams) -> dict[str, Path]:
    """Write convergence.csv, convergence_slopes.csv and convergence.svg."""
    table, slopes = convergence_table(params, config.seed, config.threads)
    out = config.output_dir
    series = {
        f"{g} a={a}": (rows["n"].to_numpy(), rows["wce"].to_numpy())
        for (a, g), rows in table.groupby(["alpha", "generator"], sort=False)
    }
    return {
        "table": write_csv(table, out / "convergence.csv"),
        "slopes": write_csv(slopes, out / "convergence_slopes.csv"),
        "plot": plot_lines(
            out / "convergence.svg",
            series,
            "n",
            "worst-case error",
            f"{params.kernel} kernel, d={params.d}",
            log=True,
        ),
    }
