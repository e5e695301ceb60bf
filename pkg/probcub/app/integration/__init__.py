"""
probcub Integration Core

Measures, kernels, kernel means, point sets, Bayesian cubature and
thermodynamic integration.
"""

from .cubature import (
    approx_bc_posterior,
    bc_posterior,
    bc_posterior_eb,
    bc_posterior_studentt,
    bc_weights,
    credible_interval,
    eb_amplitude,
    eb_lengthscale,
    log_marginal_likelihood,
    mc_estimate,
    wce_squared,
)
from .kernelmeans import (
    KernelMean,
    analytic_mean,
    catalogue,
    empirical_mean,
    initial_error,
    mean_at,
    mean_error_bound,
    mean_vector,
)
from .kernels import (
    Brownian,
    ExpQuadratic,
    Kernel,
    MaternTP,
    SphereSobolev32,
    WeightedSobolev,
    gram,
)
from .measures import (
    Empirical,
    GaussianMixture,
    Measure,
    PowerPosterior,
    UniformBox,
    UniformSphere,
    log_density,
    sample,
)
from .pointsets import (
    design_files,
    digital_net,
    effective_sample_size,
    fill_distance,
    load_sphere_design,
    mc_points,
    mcmc_points,
    spherical_fibonacci,
    split_samples,
    tune_step,
)
from .thermo import (
    TIModel,
    conjugate_gaussian_model,
    default_schedule,
    importance_density,
    inner_posterior,
    outer_posterior,
    run_ti,
    trapezium_ti,
)

__all__ = [
    # Measures
    "Measure",
    "UniformBox",
    "GaussianMixture",
    "UniformSphere",
    "Empirical",
    "PowerPosterior",
    "log_density",
    "sample",
    # Kernels
    "Kernel",
    "Brownian",
    "MaternTP",
    "ExpQuadratic",
    "WeightedSobolev",
    "SphereSobolev32",
    "gram",
    # Kernel means
    "KernelMean",
    "analytic_mean",
    "catalogue",
    "empirical_mean",
    "initial_error",
    "mean_at",
    "mean_error_bound",
    "mean_vector",
    # Point sets
    "design_files",
    "digital_net",
    "effective_sample_size",
    "fill_distance",
    "load_sphere_design",
    "mc_points",
    "mcmc_points",
    "spherical_fibonacci",
    "split_samples",
    "tune_step",
    # Cubature
    "approx_bc_posterior",
    "bc_posterior",
    "bc_posterior_eb",
    "bc_posterior_studentt",
    "bc_weights",
    "credible_interval",
    "eb_amplitude",
    "eb_lengthscale",
    "log_marginal_likelihood",
    "mc_estimate",
    "wce_squared",
    # Thermodynamic integration
    "TIModel",
    "conjugate_gaussian_model",
    "default_schedule",
    "importance_density",
    "inner_posterior",
    "outer_posterior",
    "run_ti",
    "trapezium_ti",
]
