"""
Sparse identification domain types.
"""

from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.errors import IdentificationError
from app.models.dynamics import DynamicsModel

CONSTANT_TERM = "1"
SPEED_TERM = "v_obj"
AIR_TERM = "v_air"


class ThresholdMode(str, Enum):
    """Whether lambda is compared against column-normalized or raw coefficients."""

    NORMALIZED = "normalized"
    RAW = "raw"


class Conversion(str, Enum):
    """
    Discrete-to-continuous coefficient conversion.

    ``exact`` inverts the zero-order-hold map of the linear speed ODE and is the
    one to use on continuously simulated or recorded trajectories;
    ``forward_difference`` inverts the explicit Euler map.
    """

    FORWARD_DIFFERENCE = "forward_difference"
    EXACT = "exact"


class AirSample(str, Enum):
    """Where the air speed of a snapshot pair is evaluated."""

    POSITION = "position"
    MIDPOINT = "midpoint"


class SnapshotData(BaseModel):
    """Paired speed snapshots with the modelled air speed at each row."""

    model_config = ConfigDict(frozen=True)

    v_now: list[float]
    v_next: list[float]
    v_air: list[float]
    dt: float = Field(default=0.025, gt=0.0)

    @model_validator(mode="after")
    def check_columns(self) -> "SnapshotData":
        if not (len(self.v_now) == len(self.v_next) == len(self.v_air)):
            raise ValueError("snapshot columns must have equal length")
        for column in (self.v_now, self.v_next, self.v_air):
            if any(value < 0.0 for value in column):
                raise ValueError("snapshot speeds must be >= 0")
        return self

    @classmethod
    def from_arrays(
        cls, v_now: np.ndarray, v_next: np.ndarray, v_air: np.ndarray, dt: float
    ) -> "SnapshotData":
        return cls(
            v_now=[float(v) for v in v_now],
            v_next=[float(v) for v in v_next],
            v_air=[float(v) for v in v_air],
            dt=dt,
        )

    @property
    def k(self) -> int:
        return len(self.v_now)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.asarray(self.v_now), np.asarray(self.v_next), np.asarray(self.v_air)


class LibrarySpec(BaseModel):
    """Polynomial candidate library in (v_obj, v_air)."""

    model_config = ConfigDict(frozen=True)

    max_degree: int = Field(default=3, ge=1)
    include_constant: bool = True


class SindyConfig(BaseModel):
    """Sparsification, robustness and ensembling settings."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    threshold: float = Field(default=0.07, gt=0.0, alias="lambda")
    n_bootstraps: int = Field(default=15, ge=1)
    bootstrap_fraction: float = Field(default=1.0, gt=0.0)
    bisquare_c: float = Field(default=4.685, gt=0.0)
    inclusion_threshold: float = Field(default=0.5, gt=0.0, le=1.0)
    max_irls_iter: int = Field(default=50, ge=1)
    irls_tol: float = Field(default=1e-8, gt=0.0)
    threshold_mode: ThresholdMode = ThresholdMode.NORMALIZED
    conversion: Conversion = Conversion.EXACT
    air_sample: AirSample = AirSample.MIDPOINT
    stationary_threshold: float = Field(default=1e-3, ge=0.0)
    seed: int = 0


class SindyResult(BaseModel):
    """Aggregated sparse model and its diagnostics."""

    terms: list[str]
    xi_discrete: list[float]
    xi_continuous: list[float]
    active_terms: list[str]
    r_squared: float
    per_bootstrap: list[list[float]]
    dt: float
    n_rows: int
    conversion: Conversion
    end_position_mape: Optional[float] = None

    def continuous(self, term: str) -> float:
        return self.xi_continuous[self.terms.index(term)]

    def discrete(self, term: str) -> float:
        return self.xi_discrete[self.terms.index(term)]

    @property
    def xi(self) -> tuple[float, float, float]:
        """(xi1, xi2, xi3) in the notation of the identified speed ODE."""
        return (
            self.continuous(SPEED_TERM),
            self.continuous(AIR_TERM),
            self.continuous(CONSTANT_TERM) if CONSTANT_TERM in self.terms else 0.0,
        )

    def to_dynamics(self, label: str) -> DynamicsModel:
        allowed = {CONSTANT_TERM, SPEED_TERM, AIR_TERM}
        extra = [term for term in self.active_terms if term not in allowed]
        if extra:
            raise IdentificationError(
                f"active terms {extra} do not fit the linear speed model", terms=extra
            )
        xi1, xi2, xi3 = self.xi
        try:
            return DynamicsModel(xi1=xi1, xi2=xi2, xi3=xi3, label=label)
        except ValueError as e:
            raise IdentificationError(f"identified coefficients are not physical: {e}")

