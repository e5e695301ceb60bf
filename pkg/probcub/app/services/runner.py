"""
Experiment Runner

Dispatches a validated configuration to the experiment that handles it.
"""

from collections.abc import Callable
from pathlib import Path
from typing import Any

from loguru import logger

from probcub.app.models import ExperimentConfig, ExperimentName, ExperimentParams
from probcub.app.services.convergence import run_convergence
from probcub.app.services.coverage import run_coverage
from probcub.app.services.estimate import run_estimate
from probcub.app.services.randeff import run_randeff
from probcub.app.services.sphere import run_sphere
from probcub.app.services.ti_experiment import run_ti_experiment

Runner = Callable[[ExperimentConfig, Any], dict[str, Path]]

RUNNERS: dict[ExperimentName, Runner] = {
    ExperimentName.COVERAGE: run_coverage,
    ExperimentName.CONVERGENCE: run_convergence,
    ExperimentName.TI: run_ti_experiment,
    ExperimentName.SPHERE: run_sphere,
    ExperimentName.RANDEFF: run_randeff,
    ExperimentName.ESTIMATE: run_estimate,
}


def run_experiment(config: ExperimentConfig, params: ExperimentParams) -> dict[str, Path]:
    """
    Run one experiment and return the files it wrote, keyed by role.

    Args:
        config: Validated run configuration.
        params: Parameters of the matching experiment type.

    Returns:
        Mapping of output role to path.
    """
    logger.info(
        f"Running {config.experiment.value} (seed {config.seed}, {config.threads} threads) "
        f"into {config.output_dir}"
    )
    paths = RUNNERS[config.experiment](config, params)
    logger.info(f"{config.experiment.value} finished: {len(paths)} files written")
    return paths
