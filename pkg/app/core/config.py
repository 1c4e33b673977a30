from pathlib import Path
from typing import Optional

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.errors import ConfigError
from app.models.cem import LINE_CEM, PLANE_CEM, CemConfig
from app.models.dynamics import COTTON_WAD, TRACER, DynamicsModel, SimConfig
from app.models.field import FieldGeometry, FitSettings, SyntheticFieldSpec
from app.models.sindy import SindyConfig
from app.models.task import Workspace


class Settings(BaseSettings):
    """Process-wide CLI name and log verbosity, read from the environment or ``.env``."""

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

    APP_NAME: str = "airflow"
    APP_VERSION: str = "0.1.0"
    # DEBUG overrides LOG_LEVEL
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    @field_validator("LOG_LEVEL")
    @classmethod
    def check_level(cls, level: str) -> str:
        if level.upper() not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level '{level}'")
        return level.upper()


settings = Settings()


class FieldSettings(BaseModel):
    """Tilt coverage, fusion scale and fitting controls of the field model."""

    tilt_nodes: list[float] = Field(default_factory=lambda: [0.0, 22.5, 45.0, 60.0])
    fusion_r0: float = Field(default=0.2, gt=0.0)
    table_file: Optional[Path] = None
    fit: FitSettings = Field(default_factory=FitSettings)

    @field_validator("tilt_nodes")
    @classmethod
    def check_nodes(cls, nodes: list[float]) -> list[float]:
        if not nodes:
            raise ValueError("at least one tilt node is required")
        if any(b <= a for a, b in zip(nodes, nodes[1:])):
            raise ValueError("tilt nodes must be strictly increasing")
        if nodes[0] < 0.0 or nodes[-1] >= 90.0:
            raise ValueError("tilt nodes must lie in [0, 90)")
        return nodes

    @field_validator("table_file")
    @classmethod
    def check_table_file(cls, path: Optional[Path]) -> Optional[Path]:
        if path is not None and not path.is_file():
            raise ValueError(f"field model file not found: {path}")
        return path


class CemSettings(BaseModel):
    """Controller presets for line (path following, aggregation) and plane (sorting) search."""

    line: CemConfig = LINE_CEM
    plane: CemConfig = PLANE_CEM


def _default_dynamics() -> dict[str, DynamicsModel]:
    return {TRACER.label: TRACER, COTTON_WAD.label: COTTON_WAD}


class RunConfig(BaseSettings):
    """
    Complete configuration of one CLI run.

    Every block validates against the invariants of the module that consumes
    it, so an invalid file is rejected before any computation starts.
    Environment variables fill in values the file leaves out, e.g.
    ``AIRFLOW_SIM__NOISE_SIGMA=0.02``.
    """

    model_config = SettingsConfigDict(
        env_prefix="AIRFLOW_", env_nested_delimiter="__", extra="forbid"
    )

    geometry: FieldGeometry = Field(default_factory=FieldGeometry)
    field: FieldSettings = Field(default_factory=FieldSettings)
    synthetic: SyntheticFieldSpec = Field(default_factory=SyntheticFieldSpec)
    dynamics: dict[str, DynamicsModel] = Field(default_factory=_default_dynamics)
    sindy: SindyConfig = Field(default_factory=SindyConfig)
    cem: CemSettings = Field(default_factory=CemSettings)
    sim: SimConfig = Field(default_factory=SimConfig)
    workspace: Workspace = Field(default_factory=Workspace)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def check_dynamics(self) -> "RunConfig":
        if not self.dynamics:
            raise ValueError("at least one dynamics model is required")
        return self

    def dynamics_for(self, object_class: str) -> DynamicsModel:
        try:
            return self.dynamics[object_class]
        except KeyError:
            raise ConfigError(
                f"no dynamics configured for object class '{object_class}'",
                object_class=object_class,
                known=sorted(self.dynamics),
            ) from None

    def with_seed(self, seed: int) -> "RunConfig":
        """Return a copy whose master seed and every block seed equal ``seed``."""
        return self.model_copy(
            update={
                "seed": seed,
                "synthetic": self.synthetic.model_copy(update={"seed": seed}),
                "sindy": self.sindy.model_copy(update={"seed": seed}),
                "sim": self.sim.model_copy(update={"seed": seed}),
                "cem": CemSettings(
                    line=self.cem.line.model_copy(update={"seed": seed}),
                    plane=self.cem.plane.model_copy(update={"seed": seed}),
                ),
            }
        )


def load_run_config(path: Optional[Path], seed: Optional[int] = None) -> RunConfig:
    """
    Load and validate a run configuration.

    Args:
        path: YAML file; ``None`` gives the built-in defaults
        seed: Optional master seed overriding every block seed

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: If the file is missing, unreadable or invalid
    """
    data: dict = {}
    if path is not None:
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}", file=str(path))
        try:
            data = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"config file is not valid YAML: {e}", file=str(path))
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a mapping", file=str(path))

    try:
        config = RunConfig(**data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ConfigError(
            f"invalid config value at '{location}': {first['msg']}",
            file=str(path) if path else None,
            field=location,
        )

    if seed is not None:
        config = config.with_seed(seed)
    elif data.get("seed") is not None:
        config = config.with_seed(config.seed)
    return config
