"""
Experiment Models

Pydantic schemas for experiment configuration, per-experiment parameters
and single-integral reports.
"""

from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Literal

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, field_validator


class ExperimentName(str, Enum):
    """Experiments the harness can run."""

    COVERAGE = "coverage"
    CONVERGENCE = "convergence"
    TI = "ti"
    SPHERE = "sphere"
    RANDEFF = "randeff"
    ESTIMATE = "estimate"


def _split_list(value: Any) -> Any:
    """Config files give lists as comma-separated strings."""
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def _increasing(values: list[int]) -> list[int]:
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("grid must be strictly increasing")
    return values


IntList = Annotated[list[int], BeforeValidator(_split_list)]
FloatList = Annotated[list[float], BeforeValidator(_split_list)]
StrList = Annotated[list[str], BeforeValidator(_split_list)]


class ExperimentConfig(BaseModel):
    """A parsed experiment configuration: name, raw parameters and run options."""

    model_config = ConfigDict(frozen=True)

    experiment: ExperimentName
    parameters: dict[str, str] = Field(default_factory=dict)
    output_dir: Path = Path("results")
    seed: int = Field(default=0, ge=0, lt=2**64)
    threads: int = Field(default=1, ge=1)


class ExperimentParams(BaseModel):
    """Base for per-experiment parameters; unknown keys are rejected."""

    model_config = ConfigDict(frozen=True, extra="forbid")


class CoverageParams(ExperimentParams):
    test_fns: StrList = Field(
        default_factory=lambda: ["f1", "f2"], description="Test functions (f1, f2)"
    )
    d: int = Field(default=1, ge=1, description="Dimension of the box [-5, 5]^d")
    n_grid: IntList = Field(
        default_factory=lambda: [25, 50, 100, 200, 500],
        description="Numbers of MC states, strictly increasing",
    )
    gamma_grid: FloatList = Field(
        default_factory=lambda: [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
        description="Credible-region tail masses",
    )
    replicates: int | None = Field(
        default=None, ge=1, description="Replicates per n (default 200 for d=1, else 50)"
    )
    alpha: float = Field(default=3.5, description="Matern smoothness (1.5, 2.5, 3.5)")
    lambda_mode: Literal["marginal", "eb"] = Field(
        default="marginal", description="Marginalise the amplitude or plug in its EB value"
    )
    sigma_lo: float = Field(default=1e-2, gt=0, description="Lower end of the EB grid")
    sigma_hi: float = Field(default=1e2, gt=0, description="Upper end of the EB grid")
    eb_points_per_decade: int = Field(
        default=8, ge=1, description="EB grid density (log-spaced points per decade)"
    )

    check_n_grid = field_validator("n_grid")(_increasing)

    @field_validator("test_fns")
    @classmethod
    def _known_functions(cls, value: list[str]) -> list[str]:
        unknown = set(value) - {"f1", "f2"}
        if unknown:
            raise ValueError(f"unknown test functions {sorted(unknown)}")
        return value

    @field_validator("gamma_grid")
    @classmethod
    def _open_unit(cls, value: list[float]) -> list[float]:
        if any(not 0.0 < g < 1.0 for g in value):
            raise ValueError("gamma values must lie in (0, 1)")
        return value

    @property
    def replicate_count(self) -> int:
        if self.replicates is not None:
            return self.replicates
        return 200 if self.d == 1 else 50


class ConvergenceParams(ExperimentParams):
    kernel: Literal["matern", "sobolev", "sphere"] = Field(
        default="matern", description="Kernel family"
    )
    alphas: FloatList = Field(
        default_factory=lambda: [1.5, 2.5, 3.5],
        description="Smoothness values (Matern half-integers or Sobolev integers)",
    )
    generators: StrList = Field(
        default_factory=lambda: ["qmc"],
        description="Point generators: qmc, mc, design, fibonacci",
    )
    d: int = Field(default=1, ge=1, description="Dimension (3 for the sphere kernel)")
    m_grid: IntList = Field(
        default_factory=lambda: list(range(2, 11)),
        description="Net exponents m, n = 2^m, for box generators",
    )
    n_grid: IntList = Field(
        default_factory=lambda: [16, 32, 64, 128, 256, 512, 1024],
        description="Point counts for the spherical lattice generator",
    )
    order: int = Field(default=1, ge=1, le=3, description="Digital net order")
    sigma: float = Field(default=0.005, gt=0, description="Fixed Matern lengthscale")
    lam: float = Field(default=1.0, gt=0, description="Fixed kernel amplitude")
    uniform_rows: bool = Field(
        default=True, description="Also report the equal-weight rule's error"
    )
    fit_min_n: int | None = Field(
        default=None,
        ge=1,
        description="Smallest n in the slope fit (default 256 on boxes, 1 on the sphere)",
    )

    check_m_grid = field_validator("m_grid")(_increasing)
    check_n_grid = field_validator("n_grid")(_increasing)

    @field_validator("generators")
    @classmethod
    def _known_generators(cls, value: list[str]) -> list[str]:
        unknown = set(value) - {"qmc", "mc", "design", "fibonacci"}
        if unknown:
            raise ValueError(f"unknown generators {sorted(unknown)}")
        return value

    @property
    def slope_min_n(self) -> int:
        # Below n ~ 1/sigma the net spacing exceeds the lengthscale and the rate is n^(-1/2).
        if self.fit_min_n is not None:
            return self.fit_min_n
        return 1 if self.kernel == "sphere" else 256


class SphereParams(ExperimentParams):
    n_grid: IntList = Field(
        default_factory=lambda: [16, 64, 256, 1024],
        description="Point counts (spherical lattice, MC and BMC)",
    )
    seeds: int = Field(default=1, ge=1, description="MC replicates per n")
    radiance_seed: int = Field(default=7, ge=0, description="Seed of the synthetic scene")
    gamma: float = Field(default=0.05, gt=0, lt=1, description="Interval tail mass")
    use_designs: bool = Field(
        default=True, description="Use design files when a design directory is set"
    )

    check_n_grid = field_validator("n_grid")(_increasing)


class RandeffParams(ExperimentParams):
    knots: int = Field(default=50, ge=2, description="Spline knots = integral dimension")
    observations: int = Field(default=30, ge=2, description="Poisson observations")
    tau: float = Field(
        default=500.0,
        gt=0,
        description="Random-effect precision; keeps log p(y | beta, u) within a few nats",
    )
    beta: FloatList = Field(
        default_factory=lambda: [0.0, 1.0, 1.0], description="Fixed effects (b0, b1, b2)"
    )
    m_min: int = Field(default=4, ge=1, description="Smallest net exponent")
    m_max: int = Field(default=12, ge=1, description="Largest net exponent")
    truth_m: int = Field(default=16, ge=1, description="Net exponent of the QMC reference")
    alpha: int = Field(default=1, ge=1, description="Weighted Sobolev smoothness")
    gamma: float = Field(default=0.05, gt=0, lt=1, description="Interval tail mass")
    data_seed: int = Field(default=11, ge=0, description="Seed of the synthetic dataset")


class TIParams(ExperimentParams):
    covariates: int = Field(default=5, ge=1, description="Candidate covariates")
    n_data: int = Field(default=200, ge=2, description="Logistic regression sample size")
    max_size: int = Field(default=2, ge=0, description="Largest model size")
    true_model: IntList = Field(
        default_factory=lambda: [0, 1], description="Covariates of the generating model"
    )
    m_rungs: int = Field(default=10, ge=2, description="Temperature rungs")
    n_per_rung: int = Field(default=200, ge=8, description="MCMC states per rung")
    prior_precision: float = Field(default=0.01, gt=0, description="Coefficient prior")
    draws: int = Field(default=1000, ge=1, description="Model-posterior draws")
    gamma: float = Field(default=0.05, gt=0, lt=1, description="Interval tail mass")


class EstimateParams(ExperimentParams):
    integrand: str = Field(default="f1", description="f1, f2 or external")
    command: str | None = Field(default=None, description="External evaluator command")
    d: int = Field(default=1, ge=1, description="Dimension")
    lo: float = Field(default=-5.0, description="Lower box bound (every coordinate)")
    hi: float = Field(default=5.0, description="Upper box bound (every coordinate)")
    measure: Literal["uniform", "gaussian"] = Field(
        default="uniform", description="Integration measure: uniform box or standard normal"
    )
    n: int = Field(default=200, ge=0, description="Number of states")
    generator: Literal["mc", "qmc", "mcmc", "file"] = Field(
        default="mc", description="State generator"
    )
    points_file: Path | None = Field(default=None, description="CSV or text file of states")
    kernel: Literal["matern", "expquad"] = Field(default="matern", description="Kernel")
    alpha: float = Field(default=3.5, description="Matern smoothness")
    sigma: float | None = Field(default=None, gt=0, description="Lengthscale (EB if unset)")
    lam: float | None = Field(
        default=None, gt=0, description="Amplitude (marginalised if unset)"
    )
    empirical_fallback: bool = Field(
        default=False, description="Allow an empirical kernel mean for unsupported pairs"
    )
    empirical_m: int = Field(default=5000, ge=1, description="Empirical kernel-mean size")
    gamma: float = Field(default=0.01, gt=0, lt=1, description="Interval tail mass")


PARAMETER_MODELS: dict[ExperimentName, type[ExperimentParams]] = {
    ExperimentName.COVERAGE: CoverageParams,
    ExperimentName.CONVERGENCE: ConvergenceParams,
    ExperimentName.TI: TIParams,
    ExperimentName.SPHERE: SphereParams,
    ExperimentName.RANDEFF: RandeffParams,
    ExperimentName.ESTIMATE: EstimateParams,
}


class EstimateReport(BaseModel):
    """Single-integral report produced by the estimate experiment."""

    integrand: str
    kernel: str
    measure: str
    n: int
    dropped: int = 0
    mean: float
    variance: float
    family: str
    dof: int | None = None
    gamma: float
    lo: float
    hi: float
    hyperparameters: dict[str, float] = Field(default_factory=dict)
    jitter: float = 0.0
    kernel_mean_form: str
    inflation: float | None = None
    delta: float | None = None
    mc_mean: float | None = None
    mc_stderr: float | None = None
    truth: float | None = None
