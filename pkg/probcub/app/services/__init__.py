"""
probcub Services

Experiments, integrands, result output and the pieces they share.
"""

from .config_loader import describe_parameters, load_experiment, read_config_file
from .runner import RUNNERS, run_experiment

__all__ = [
    "RUNNERS",
    "describe_parameters",
    "load_experiment",
    "read_config_file",
    "run_experiment",
]
