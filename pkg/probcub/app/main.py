"""
probcub Command Line

Entry point for the experiment harness:

    probcub <experiment> [--config FILE] [--out DIR] [--seed N] [--threads N]
"""

import argparse
import sys
from collections.abc import Sequence

from loguru import logger
from pydantic import ValidationError

from probcub.app import __version__
from probcub.app.config import get_settings
from probcub.app.errors import (
    ConditioningError,
    ConfigError,
    DegenerateChainError,
    UnsupportedOperationError,
)
from probcub.app.models import ExperimentName
from probcub.app.services import describe_parameters, load_experiment, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probcub",
        description="Bayesian cubature experiments with calibrated uncertainty.",
        epilog=describe_parameters(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("experiment", choices=[name.value for name in ExperimentName])
    parser.add_argument("--config", default=None, help="key = value experiment file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--threads", type=int, default=None, help="work-pool size")
    parser.add_argument("--version", action="version", version=f"probcub {__version__}")
    return parser


def configure_logging(level: str | None = None) -> None:
    """Send loguru output to stderr at the configured level."""
    logger.remove()
    logger.add(sys.stderr, level=level or get_settings().log_level)


def main(argv: Sequence[str] | None = None) -> int:
    """
    Run one experiment.

    Returns:
        0 on success, 2 for configuration or argument errors, 3 for
        numerical failures, 4 for file and evaluator errors.
    """
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        config, params = load_experiment(
            args.experiment, args.config, args.out, args.seed, args.threads
        )
        paths = run_experiment(config, params)
    except (ConditioningError, DegenerateChainError) as exc:
        logger.error(f"Numerical failure: {exc}")
        return EXIT_NUMERICAL
    except (ConfigError, ValidationError, ValueError, UnsupportedOperationError) as exc:
        logger.error(f"Invalid configuration: {exc}")
        return EXIT_CONFIG
    except OSError as exc:
        logger.error(f"I/O failure: {exc}")
        return EXIT_IO

    for role, path in paths.items():
        print(f"{role}\t{path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
