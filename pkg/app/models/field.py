"""
Airflow field domain types.

Angles are stored in degrees (the unit of every file and CLI flag); the
services convert to radians internally.
"""

import math
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

Point = tuple[float, float]


class GridSource(str, Enum):
    """Origin of a gridded air speed data set."""

    MEASUREMENT = "measurement"
    CFD = "cfd"
    FUSED = "fused"
    SYNTHETIC = "synthetic"


class NozzleOrientation(BaseModel):
    """Pan/tilt servo angles of the air nozzle."""

    model_config = ConfigDict(frozen=True)

    pan_deg: float = Field(ge=-180.0, le=180.0)
    tilt_deg: float = Field(ge=0.0, lt=90.0)


class FieldGeometry(BaseModel):
    """Nozzle shaft height and the projection/stagnation offset law."""

    model_config = ConfigDict(frozen=True)

    h: float = Field(default=1.43, gt=0.0)
    a1: float = Field(default=0.1, ge=0.0)
    a2: float = Field(default=2.33, gt=1.0)

    @property
    def monotone_limit(self) -> float:
        """Largest ||c|| for which ||s|| = ||c|| - a1*||c||^a2 still increases."""
        if self.a1 == 0.0:
            return math.inf
        return (1.0 / (self.a1 * self.a2)) ** (1.0 / (self.a2 - 1.0))

    @property
    def stagnation_limit(self) -> float:
        """Largest reachable ||s|| (image of the monotone branch)."""
        x = self.monotone_limit
        if math.isinf(x):
            return math.inf
        return x - self.a1 * x**self.a2


class RadialProfile(BaseModel):
    """Coefficients of v(r) = b1 * (exp(b2 r) - exp(b3 r))."""

    model_config = ConfigDict(frozen=True)

    b1: float = Field(gt=0.0)
    b2: float = Field(lt=0.0)
    b3: float

    @model_validator(mode="after")
    def check_ordering(self) -> "RadialProfile":
        if not self.b3 < self.b2:
            raise ValueError(f"b3 ({self.b3}) must be below b2 ({self.b2})")
        return self

    @property
    def peak_radius(self) -> float:
        return math.log(self.b2 / self.b3) / (self.b3 - self.b2)

    def as_array(self) -> np.ndarray:
        return np.array([self.b1, self.b2, self.b3])


class VelocityGrid(BaseModel):
    """Air speed magnitudes sampled on the floor for one nozzle orientation."""

    model_config = ConfigDict(frozen=True)

    tilt_deg: float = Field(ge=0.0, lt=90.0)
    pan_deg: float = Field(default=90.0, ge=-180.0, le=180.0)
    source: GridSource
    points: list[tuple[float, float, float]]

    @model_validator(mode="after")
    def check_points(self) -> "VelocityGrid":
        seen: set[tuple[float, float]] = set()
        for x, y, speed in self.points:
            if speed < 0.0 or not math.isfinite(speed):
                raise ValueError(f"speed at ({x}, {y}) must be a finite value >= 0")
            if (x, y) in seen:
                raise ValueError(f"duplicate grid location ({x}, {y})")
            seen.add((x, y))
        return self

    @property
    def xy(self) -> np.ndarray:
        return np.array([(x, y) for x, y, _ in self.points], dtype=float).reshape(-1, 2)

    @property
    def speeds(self) -> np.ndarray:
        return np.array([speed for _, _, speed in self.points], dtype=float)

    @property
    def orientation(self) -> NozzleOrientation:
        return NozzleOrientation(pan_deg=self.pan_deg, tilt_deg=self.tilt_deg)


class ProfileFit(BaseModel):
    """Fit result and diagnostics for one alpha bin."""

    alpha_deg: int
    profile: RadialProfile
    n_samples: int
    half_width_deg: float
    rms_residual: float
    mape: float


class FitSettings(BaseModel):
    """
    Controls for the per-bin profile fit.

    The decay rate ``-b2`` is bounded to ``decay_bounds`` and the ratio
    ``b3 / b2`` to ``ratio_bounds``. A fit is only accepted when its peak
    radius lies inside ``peak_radius_bounds`` (meters).
    """

    pool_half_width_deg: float = Field(default=5.0, gt=0.0)
    max_half_width_deg: float = Field(default=45.0, gt=0.0)
    min_bin_samples: int = Field(default=12, ge=3)
    max_iterations: int = Field(default=200, ge=1)
    xtol: float = Field(default=1e-10, gt=0.0)
    min_radius: float = Field(default=1e-6, ge=0.0)
    decay_bounds: tuple[float, float] = (0.05, 50.0)
    ratio_bounds: tuple[float, float] = (1.05, 200.0)
    peak_radius_bounds: tuple[float, float] = (0.02, 1.0)
    start_grid_size: int = Field(default=32, ge=2)
    shape_prior_weight: float = Field(default=0.05, ge=0.0)

    @model_validator(mode="after")
    def check_bounds(self) -> "FitSettings":
        low, high = self.decay_bounds
        if not 0.0 < low < high:
            raise ValueError(f"decay_bounds must satisfy 0 < low < high, got {self.decay_bounds}")
        low, high = self.ratio_bounds
        if not 1.0 < low < high:
            raise ValueError(f"ratio_bounds must satisfy 1 < low < high, got {self.ratio_bounds}")
        low, high = self.peak_radius_bounds
        if not 0.0 <= low < high:
            raise ValueError(
                f"peak_radius_bounds must satisfy 0 <= low < high, got {self.peak_radius_bounds}"
            )
        return self


class SyntheticFieldSpec(BaseModel):
    """
    Ground-truth field used in place of measured or simulated grids.

    The profile along direction alpha (relative to pan) at tilt phi is
    ``b1 * (1 + asymmetry * sin(phi) * cos(alpha))`` with fixed ``b2`` and ``b3``,
    so the field is isotropic at zero tilt. Grids are square, centered on the
    stagnation point and ``2 * half_extent`` wide.
    """

    model_config = ConfigDict(frozen=True)

    b1: float = Field(default=5.23, gt=0.0)
    b2: float = Field(default=-2.0, lt=0.0)
    b3: float = -16.0
    asymmetry: float = Field(default=0.3, ge=0.0, lt=1.0)
    tilt_deg: float = Field(default=22.5, ge=0.0, lt=90.0)
    pan_deg: float = Field(default=90.0, ge=-180.0, le=180.0)
    stagnation: Optional[Point] = None
    half_extent: float = Field(default=1.0, gt=0.0)
    resolution: int = Field(default=11, ge=2)
    noise: float = Field(default=0.0, ge=0.0)
    seed: int = 0

    @model_validator(mode="after")
    def check_profile(self) -> "SyntheticFieldSpec":
        RadialProfile(b1=self.b1, b2=self.b2, b3=self.b3)
        return self

    def profile_at(self, alpha_rel_deg: float, tilt_deg: float) -> RadialProfile:
        scale = 1.0 + self.asymmetry * math.sin(math.radians(tilt_deg)) * math.cos(
            math.radians(alpha_rel_deg)
        )
        return RadialProfile(b1=self.b1 * scale, b2=self.b2, b3=self.b3)
