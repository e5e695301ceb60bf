"""
probcub Data Models

Pydantic schemas for point sets, posteriors and experiment configuration.
"""

from .arrays import FloatArray, freeze
from .experiment import (
    PARAMETER_MODELS,
    ConvergenceParams,
    CoverageParams,
    EstimateParams,
    EstimateReport,
    ExperimentConfig,
    ExperimentName,
    ExperimentParams,
    RandeffParams,
    SphereParams,
    TIParams,
)
from .pointset import PointSet, Provenance, ProvenanceKind, as_points, deduplicate
from .posterior import (
    CubaturePosterior,
    CubatureWeights,
    KernelMeanForm,
    PosteriorFamily,
    TemperatureSchedule,
    TIPosterior,
)

__all__ = [
    # Arrays
    "FloatArray",
    "freeze",
    # Point sets
    "PointSet",
    "Provenance",
    "ProvenanceKind",
    "as_points",
    "deduplicate",
    # Posteriors
    "CubaturePosterior",
    "CubatureWeights",
    "KernelMeanForm",
    "PosteriorFamily",
    "TemperatureSchedule",
    "TIPosterior",
    # Experiments
    "PARAMETER_MODELS",
    "ConvergenceParams",
    "CoverageParams",
    "EstimateParams",
    "EstimateReport",
    "ExperimentConfig",
    "ExperimentName",
    "ExperimentParams",
    "RandeffParams",
    "SphereParams",
    "TIParams",
]
