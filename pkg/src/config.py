"""
Analysis configuration: defaults, environment overrides, YAML config files
"""
import os
from typing import Optional

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from yaml.loader import SafeLoader

from errors import ConfigError

load_dotenv()

__version__ = "0.1.0"

ENV_PREFIX = "GEOSCOPE_"


class AnalysisConfig(BaseModel):
    """Every tunable of an analysis run; echoed verbatim in reports"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    max_order: Optional[int] = Field(default=None, ge=0)
    max_valence: int = Field(default=8, ge=4)
    tower_depth: Optional[int] = Field(default=None, ge=1)
    rank_tol: float = Field(default=1e-8, gt=0)
    steps: int = Field(default=100, ge=1)
    steps_per_cell: int = Field(default=50, ge=1)
    h_probe: float = Field(default=1e-3, gt=0)
    parallel_h: float = Field(default=1e-3, gt=0)
    pd_tol: float = Field(default=1e-10, ge=0)
    jobs: int = Field(default=1, ge=1)

    @classmethod
    def from_env(cls, **overrides) -> "AnalysisConfig":
        """Defaults, then GEOSCOPE_<FIELD> environment variables, then overrides"""
        values = {}
        for name in cls.model_fields:
            raw = os.getenv(ENV_PREFIX + name.upper())
            if raw is not None and raw != "":
                values[name] = raw
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**values)
        except ValidationError as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc

    def merged(self, **overrides) -> "AnalysisConfig":
        values = self.model_dump()
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return AnalysisConfig(**values)
        except ValidationError as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc

    def resolved(self, n: int) -> "AnalysisConfig":
        """Fill the dimension-dependent defaults for a chart of dimension n"""
        fiber_dim = n + n * (n - 1) // 2
        return self.merged(
            max_order=self.max_order if self.max_order is not None else min(n * (n - 1) // 2, 4),
            tower_depth=self.tower_depth if self.tower_depth is not None else fiber_dim + 2,
        )


def load_config(config_path: Optional[str] = None, **overrides) -> AnalysisConfig:
    """
    Load configuration

    Args:
        config_path: optional YAML file with AnalysisConfig fields
        overrides: explicit values (CLI flags); None means "not given"

    Returns:
        AnalysisConfig built from defaults < environment < file < overrides
    """
    file_values = {}
    if config_path:
        try:
            with open(config_path) as file:
                file_values = yaml.load(file, Loader=SafeLoader) or {}
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {config_path}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config file {config_path}: {exc}") from exc
        if not isinstance(file_values, dict):
            raise ConfigError(f"config file {config_path} must hold a mapping")
    file_values.update({k: v for k, v in overrides.items() if v is not None})
    return AnalysisConfig.from_env(**file_values)
