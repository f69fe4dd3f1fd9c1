"""Experiment configuration: INI sections validated into per-command pydantic models."""

import configparser
import logging
import os
import typing
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "RISKBIAS_OUTPUT_DIR"


class CommandConfig(BaseModel):
    """Settings shared by every command."""

    model_config = ConfigDict(extra='forbid', frozen=True)

    seed: int = Field(0, ge=0, lt=2**64, description="Root seed of all random streams")
    threads: int = Field(1, ge=1, description="Worker threads for replicate loops")
    out: Optional[Path] = Field(None, description="Output CSV path")


class EnvelopeConfig(CommandConfig):
    N: int = Field(20, ge=1)
    k: int = Field(10, ge=1)
    k_alpha: list[float] = Field(default_factory=lambda: [0.5, 0.6, 0.7, 0.8, 0.9, 1.0], min_length=1,
                                 description="Curves to emit, as k * alpha")
    p_points: int = Field(101, ge=2, description="Points on each curve, p over [0, 1/2]")

    @model_validator(mode='after')
    def curves_in_sweep_range(self):
        if self.N < self.k:
            raise ValueError(f'N={self.N} < k={self.k}')
        bad = [v for v in self.k_alpha if not self.k / self.N - 1e-12 <= v <= 1.0 + 1e-12]
        if bad:
            raise ValueError(f'k_alpha values {bad} outside [k/N, 1] = [{self.k / self.N:.6g}, 1]')
        return self


class BiasConfig(CommandConfig):
    k: int = Field(10, ge=1)
    M: list[int] = Field(default_factory=lambda: [1, 2, 4, 8], min_length=1, description="Relative sample sizes N/k")
    e0_points: int = Field(100, ge=2)
    e0_max: float = Field(0.35, gt=0.0, lt=0.5)

    @field_validator('M')
    @classmethod
    def at_least_one_point_per_cell(cls, v):
        if any(m < 1 for m in v):
            raise ValueError('every M must be >= 1')
        return v


class CompareVcConfig(CommandConfig):
    N: int = Field(50, ge=1)
    k: int = Field(10, ge=1)
    e0_points: int = Field(100, ge=2)

    @model_validator(mode='after')
    def dense_regime(self):
        if self.N < self.k:
            raise ValueError(f'N={self.N} < k={self.k}')
        return self


class SimulateConfig(CommandConfig):
    families: list[Literal["A", "B"]] = Field(default_factory=lambda: ["A", "B"], min_length=1)
    dim: int = Field(2, ge=1)
    N: int = Field(100, ge=2)
    max_leaves: int = Field(4, ge=1)
    reps: int = Field(1000, ge=2)
    theta0: float = Field(0.83, gt=0.0, le=1.0)
    n_g1: int = Field(20, ge=2)
    n_theta: int = Field(20, ge=1)
    n_members: int = Field(11, ge=2, description="Members of family B")
    compare_M: float = Field(4.0, ge=1.0, description="Relative sample size of the analytic comparison curve")


class ConfidenceConfig(CommandConfig):
    dim: int = Field(2, ge=1)
    N: int = Field(50, ge=2)
    max_leaves: int = Field(3, ge=1)
    eta: float = Field(0.9, gt=0.0, lt=1.0)
    functional: Literal["empirical_risk", "loo"] = "loo"
    reps: int = Field(200, ge=100)
    validate_reps: int = Field(200, ge=100)
    n_members: int = Field(11, ge=2)
    n_bins: int = Field(50, ge=1)
    n_levels: int = Field(200, ge=1)
    guard: float = Field(2.0, ge=0.0, description="Standard errors added to eta in the fit target")


COMMAND_CONFIGS: dict[str, type[CommandConfig]] = {
    "envelope": EnvelopeConfig,
    "bias": BiasConfig,
    "compare-vc": CompareVcConfig,
    "simulate": SimulateConfig,
    "confidence": ConfidenceConfig,
}


def _is_list_field(model: type[BaseModel], name: str) -> bool:
    field = model.model_fields.get(name)
    return field is not None and typing.get_origin(field.annotation) is list


def _format_validation_error(command: str, error: ValidationError) -> list[str]:
    messages = []
    for item in error.errors():
        where = ".".join(str(part) for part in item['loc']) or "<config>"
        messages.append(f"[{command}] {where}: {item['msg']}")
    return messages


def read_section(path: Path, command: str) -> dict[str, str]:
    """Raw key/value pairs of one command section; missing section gives {}."""
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep N, M upper case
    try:
        with open(path, encoding='utf-8') as f:
            parser.read_file(f)
    except (OSError, configparser.Error) as e:
        raise ConfigError([f"cannot read config file {path}: {e}"]) from e
    if not parser.has_section(command):
        logger.info(f"No [{command}] section in {path}, using defaults")
        return {}
    return dict(parser.items(command))


def resolve_output(out: Optional[Path], command: str) -> Path:
    """Relative outputs land in $RISKBIAS_OUTPUT_DIR when set, else the working directory."""
    path = Path(out) if out is not None else Path(f"{command}.csv")
    base = os.getenv(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def load_config(
    command: str,
    path: Optional[Path] = None,
    overrides: Optional[dict[str, object]] = None,
) -> CommandConfig:
    """
    Build the validated config of a command from file values and CLI overrides.

    Raises:
        ConfigError: listing every problem found.
    """
    if command not in COMMAND_CONFIGS:
        raise ConfigError([f"unknown command {command!r}"])
    model = COMMAND_CONFIGS[command]

    values: dict[str, object] = {}
    if path is not None:
        for key, raw in read_section(Path(path), command).items():
            if _is_list_field(model, key):
                values[key] = [item.strip() for item in raw.split(',') if item.strip()]
            else:
                values[key] = raw.strip()
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})

    try:
        config = model(**values)
    except ValidationError as e:
        raise ConfigError(_format_validation_error(command, e)) from e

    logger.debug(f"[{command}] config: {config.model_dump()}")
    return config
