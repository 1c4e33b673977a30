"""
Cross-entropy controller domain types.

Sampling distribution parameters are given in centimetres (cm and cm^2), the
unit the controller was tuned in; distances used by the cost are metres.
"""

import math
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.field import NozzleOrientation, Point


class SamplingMode(str, Enum):
    """Univariate search along a line or bivariate search over the plane."""

    LINE = "line"
    PLANE = "plane"


class CemConfig(BaseModel):
    """Gaussian sampling parameters and the penalized cost settings."""

    model_config = ConfigDict(frozen=True)

    mu0: Optional[float | list[float]] = 41.8
    sigma0: float | list[list[float]] = 20.9
    n: int = Field(default=25, ge=1)
    n_elite: int = Field(default=3, ge=1)
    i_max: int = Field(default=5, ge=1)
    sigma_star: float = Field(default=0.3, gt=0.0)
    delta_min: float = Field(default=0.10, gt=0.0)
    J_p: float = Field(default=1e3, gt=0.0)
    delta_T: float = Field(default=1.5, gt=0.0)
    variance_floor: float = Field(default=0.0, ge=0.0)
    seed: int = 0

    @model_validator(mode="after")
    def check_distribution(self) -> "CemConfig":
        if self.n_elite > self.n:
            raise ValueError(f"n_elite ({self.n_elite}) must not exceed n ({self.n})")
        if isinstance(self.sigma0, list):
            matrix = np.asarray(self.sigma0, dtype=float)
            if matrix.shape != (2, 2) or not np.allclose(matrix, matrix.T):
                raise ValueError("sigma0 must be a symmetric 2x2 covariance")
            if np.any(np.linalg.eigvalsh(matrix) <= 0.0):
                raise ValueError("sigma0 must be positive definite")
        elif self.sigma0 <= 0.0:
            raise ValueError("sigma0 must be positive")
        if isinstance(self.mu0, list) and len(self.mu0) != 2:
            raise ValueError("a planar mu0 needs two coordinates")
        return self

    def sigma0_for(self, mode: SamplingMode) -> np.ndarray:
        if mode is SamplingMode.LINE:
            if isinstance(self.sigma0, list):
                raise ValueError("line sampling needs a scalar sigma0")
            return np.array([[float(self.sigma0)]])
        if isinstance(self.sigma0, list):
            return np.asarray(self.sigma0, dtype=float)
        return np.eye(2) * float(self.sigma0)


# Parameter values tuned for single-object path following (line search)
LINE_CEM = CemConfig()

# Parameter values tuned for sorting (planar search); mu0 = mean object position
PLANE_CEM = CemConfig(
    mu0=None,
    sigma0=[[31.3, 0.0], [0.0, 31.3]],
    n=100,
    n_elite=10,
    i_max=5,
    sigma_star=0.5,
)


class SamplingSpace(BaseModel):
    """Where candidate stagnation points are drawn."""

    model_config = ConfigDict(frozen=True)

    mode: SamplingMode
    anchor: Optional[Point] = None
    away_dir: Optional[Point] = None

    @model_validator(mode="after")
    def check_line(self) -> "SamplingSpace":
        if self.mode is SamplingMode.LINE:
            if self.anchor is None or self.away_dir is None:
                raise ValueError("line sampling needs an anchor and a direction")
            if abs(math.hypot(*self.away_dir) - 1.0) > 1e-9:
                raise ValueError("away_dir must be a unit vector")
        return self

    @classmethod
    def line_away_from(cls, anchor: Point, reference: Point) -> "SamplingSpace":
        dx, dy = anchor[0] - reference[0], anchor[1] - reference[1]
        norm = math.hypot(dx, dy)
        direction = (dx / norm, dy / norm) if norm > 0.0 else (1.0, 0.0)
        return cls(mode=SamplingMode.LINE, anchor=anchor, away_dir=direction)

    @classmethod
    def plane(cls) -> "SamplingSpace":
        return cls(mode=SamplingMode.PLANE)


class CemOutcome(BaseModel):
    """Optimal stagnation point of one control step and how it was found."""

    s_star: Point
    orientation: Optional[NozzleOrientation]
    best_cost: float
    iterations_used: int
    converged: bool
    feasible: bool
    predicted_positions: list[Point]
    variance_history: list[float]
