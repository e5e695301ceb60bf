"""
Application Configuration

Pydantic Settings for numerical tolerances and runtime options.
"""

from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Settings loaded from PROBCUB_* environment variables or a .env file.

    Runtime:
        - LOG_LEVEL: loguru sink level
        - THREADS: default work-pool size for experiments
        - OUTPUT_DIR: where experiment CSV/SVG files go
        - DESIGN_DIR: directory of spherical design files

    Numerics:
        - JITTER_*: diagonal jitter escalation for Gram factorisation
        - VARIANCE_CLAMP_REL: round-off band for negative posterior variances
        - EB_*: empirical-Bayes lengthscale grid and refinement
        - POOLED_CAP: maximum pooled regression set in thermodynamic integration
    """

    model_config = SettingsConfigDict(
        env_prefix="PROBCUB_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    log_level: str = "INFO"
    threads: int = Field(default=1, ge=1)
    output_dir: Path = Path("results")
    design_dir: Path | None = None

    # Gram factorisation: start at jitter_initial * tr(K)/n, multiply by
    # jitter_factor until jitter_max * tr(K)/n.
    jitter_initial: float = Field(default=1e-12, gt=0)
    jitter_max: float = Field(default=1e-6, gt=0)
    jitter_factor: float = Field(default=10.0, gt=1)

    variance_clamp_rel: float = Field(default=1e-6, ge=0)
    delta: float = Field(default=0.05, gt=0, le=1)
    dedup_tol: float = Field(default=1e-12, ge=0)

    eb_grid_lo: float = Field(default=1e-3, gt=0)
    eb_grid_hi: float = Field(default=1e3, gt=0)
    eb_points_per_decade: int = Field(default=32, ge=1)
    eb_rtol: float = Field(default=1e-3, gt=0)
    eb_max_points: int = Field(default=400, ge=2)

    pooled_cap: int = Field(default=2000, ge=4)


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
