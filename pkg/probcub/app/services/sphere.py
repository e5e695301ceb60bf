"""
Sphere Experiment

Reflected radiance of a synthetic three-channel environment map off a
surface facing the camera, estimated on S^2 by MC, QMC (equal weights on a
design or spherical lattice), BMC and BQMC with the Sobolev(3/2) kernel.
"""

from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger
from scipy import stats

from probcub.app.config import get_settings
from probcub.app.integration.cubature import bc_posterior_studentt, mc_estimate, wce_squared
from probcub.app.integration.kernelmeans import analytic_mean
from probcub.app.integration.kernels import SphereSobolev32
from probcub.app.integration.measures import UniformSphere
from probcub.app.integration.pointsets import (
    design_files,
    load_sphere_design,
    mc_points,
    spherical_fibonacci,
)
from probcub.app.models import ExperimentConfig, PointSet, SphereParams
from probcub.app.services.integrands import RadianceScene
from probcub.app.services.tables import plot_intervals, write_csv
from probcub.app.services.workpool import cell_seed, run_cells

COLUMNS = ["n", "rule", "seed", "channel", "mean", "lo", "hi", "wce", "truth"]
CHANNELS = ("r", "g", "b")


def structured_sets(params: SphereParams) -> list[PointSet]:
    """Designs from the configured directory, else spherical lattices at n_grid."""
    directory = get_settings().design_dir
    if params.use_designs and directory is not None:
        return [load_sphere_design(p) for p in design_files(directory)]
    return [spherical_fibonacci(n) for n in params.n_grid]


def _rule_rows(
    X: PointSet,
    rule: str,
    seed: int | None,
    scene: RadianceScene,
    truth: np.ndarray,
    gamma: float,
) -> list[dict[str, object]]:
    kernel = SphereSobolev32()
    km = analytic_mean(kernel, UniformSphere())
    values = scene.integrand(np.asarray(X.points))
    bayesian = rule.startswith("B")
    z = float(stats.norm.ppf(1.0 - gamma / 2.0))

    rows: list[dict[str, object]] = []
    for c, channel in enumerate(CHANNELS):
        f = values[:, c]
        if bayesian:
            post = bc_posterior_studentt(kernel, km, X, f)
            mean = post.mean
            lo, hi = post.credible_interval(gamma)
            wce = float(np.sqrt(wce_squared(kernel, km, X, post.weights)))
        else:
            mean, stderr = mc_estimate(f, X.counts)
            lo, hi = (mean - z * stderr, mean + z * stderr) if rule == "MC" else (np.nan, np.nan)
            wce = float(np.sqrt(wce_squared(kernel, km, X, np.full(X.n, 1.0 / X.n))))
        rows.append(
            {
                "n": X.n,
                "rule": rule,
                "seed": seed,
                "channel": channel,
                "mean": mean,
                "lo": lo,
                "hi": hi,
                "wce": wce,
                "truth": float(truth[c]),
            }
        )
    return rows


def sphere_table(params: SphereParams, seed: int = 0, threads: int = 1) -> pd.DataFrame:
    """Estimates, intervals and worst-case errors for every rule, n and channel."""
    scene = RadianceScene.from_seed(params.radiance_seed)
    truth = scene.truth()
    logger.info(f"Reference radiance {np.array2string(truth, precision=6)}")

    structured = structured_sets(params)
    jobs: list[tuple[PointSet, str, int | None]] = []
    for X in structured:
        jobs.append((X, "QMC", None))
        jobs.append((X, "BQMC", None))
    for X in structured:
        for s in range(params.seeds):
            random = mc_points(UniformSphere(), X.n, cell_seed(seed, X.n, s))
            jobs.append((random, "MC", s))
            jobs.append((random, "BMC", s))

    results = run_cells(
        lambda job: _rule_rows(job[0], job[1], job[2], scene, truth, params.gamma),
        jobs,
        threads,
        "sphere rules",
    )
    table = pd.DataFrame([row for rows in results for row in rows], columns=COLUMNS)
    return table.astype({"seed": "Int64"})


def run_sphere(config: ExperimentConfig, params: SphereParams) -> dict[str, Path]:
    """Write sphere.csv and one interval chart per channel."""
    table = sphere_table(params, config.seed, config.threads)
    out = config.output_dir
    paths = {"table": write_csv(table, out / "sphere.csv")}
    for channel in CHANNELS:
        rows = table[(table["channel"] == channel) & table["rule"].isin(["BMC", "BQMC"])]
        rows = rows[(rows["seed"].fillna(0) == 0).to_numpy(dtype=bool)]
        paths[f"plot_{channel}"] = plot_intervals(
            out / f"sphere_{channel}.svg",
            rows,
            x="n",
            group="rule",
            truth=float(rows["truth"].iloc[0]),
            ylabel=f"radiance ({channel})",
        )
    return paths
