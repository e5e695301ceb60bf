"""
Experiment Config Loader

Reads `key = value` experiment files (with `#` comments) and validates them
into an ExperimentConfig plus the experiment's typed parameter model.
"""

from pathlib import Path
from typing import Any

from dotenv import dotenv_values
from loguru import logger
from pydantic import ValidationError

from probcub.app.config import get_settings
from probcub.app.errors import ConfigError
from probcub.app.models import PARAMETER_MODELS, ExperimentConfig, ExperimentName, ExperimentParams

RUN_KEYS = ("output_dir", "seed", "threads")


def read_config_file(path: str | Path) -> dict[str, str]:
    """
    Parse a config file into raw string values.

    Raises:
        ConfigError: If the file does not exist or a key has no value.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    raw = dotenv_values(path, interpolate=False)
    missing = [key for key, value in raw.items() if value is None]
    if missing:
        raise ConfigError(f"{path}: keys without a value: {', '.join(missing)}")
    return {key.strip().lower(): str(value).strip() for key, value in raw.items()}


def load_experiment(
    experiment: str,
    config_path: str | Path | None = None,
    output_dir: str | Path | None = None,
    seed: int | None = None,
    threads: int | None = None,
) -> tuple[ExperimentConfig, ExperimentParams]:
    """
    Build a validated configuration; command-line options win over file values.

    Args:
        experiment: Experiment name.
        config_path: Optional config file.
        output_dir: Output directory override.
        seed: Master seed override.
        threads: Work-pool size override.

    Returns:
        Tuple of (ExperimentConfig, typed parameters).

    Raises:
        ConfigError: On unknown experiments, unknown keys or invalid values.
    """
    try:
        name = ExperimentName(experiment)
    except ValueError as exc:
        raise ConfigError(f"unknown experiment {experiment!r}") from exc

    raw = read_config_file(config_path) if config_path is not None else {}
    settings = get_settings()
    run: dict[str, Any] = {
        "output_dir": raw.pop("output_dir", settings.output_dir),
        "seed": raw.pop("seed", 0),
        "threads": raw.pop("threads", settings.threads),
    }
    overrides = {"output_dir": output_dir, "seed": seed, "threads": threads}
    run.update({key: value for key, value in overrides.items() if value is not None})

    try:
        config = ExperimentConfig(experiment=name, parameters=raw, **run)
        params = PARAMETER_MODELS[name].model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid {name.value} configuration:\n{exc}") from exc

    logger.debug(f"Loaded {name.value} config: {params.model_dump()}")
    return config, params


def describe_parameters() -> str:
    """Every config key of every experiment, with its description and default."""
    lines = ["run options (any experiment): " + ", ".join(RUN_KEYS)]
    for name, model in PARAMETER_MODELS.items():
        lines.append("")
        lines.append(f"{name.value}:")
        for key, field in model.model_fields.items():
            default = field.get_default(call_default_factory=True)
            lines.append(f"  {key:<20} {field.description or ''} (default: {default})")
    return "\n".join(lines)
