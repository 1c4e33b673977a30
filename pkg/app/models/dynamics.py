"""
Object dynamics domain types.
"""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.field import Point


class DynamicsModel(BaseModel):
    """Identified speed ODE dv/dt = xi1*v + xi2*v_air + xi3 for one object class."""

    model_config = ConfigDict(frozen=True)

    xi1: float = Field(lt=0.0)
    xi2: float = Field(gt=0.0)
    xi3: float
    label: str = "tracer"

    @property
    def motion_threshold(self) -> float:
        """Air speed above which an object at rest starts to move."""
        return max(-self.xi3 / self.xi2, 0.0)

    def equilibrium_speed(self, v_air: float) -> float:
        return max((self.xi2 * v_air + self.xi3) / -self.xi1, 0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.xi1, self.xi2, self.xi3])


# Coefficients identified for the two object classes used in the experiments
TRACER = DynamicsModel(xi1=-2.66, xi2=4.26, xi3=-8.53, label="tracer")
COTTON_WAD = DynamicsModel(xi1=-4.25, xi2=3.46, xi3=-4.12, label="cotton")


class ObjectState(BaseModel):
    """Planar position and scalar speed of one manipulated object."""

    model_config = ConfigDict(frozen=True)

    object_id: int = 0
    position: Point
    speed: float = Field(default=0.0, ge=0.0)
    dynamics: DynamicsModel = TRACER


class SimConfig(BaseModel):
    """Integrator tolerances, plant noise and actuation delay."""

    model_config = ConfigDict(frozen=True)

    rel_tol: float = Field(default=1e-6, gt=0.0)
    abs_tol: float = Field(default=1e-9, gt=0.0)
    noise_sigma: float = Field(default=0.0, ge=0.0)
    delay_s: float = Field(default=0.0, ge=0.0)
    output_rate_hz: float = Field(default=40.0, gt=0.0)
    seed: int = 0

    @property
    def output_dt(self) -> float:
        return 1.0 / self.output_rate_hz


class Trajectory(BaseModel):
    """Time-stamped positions and speeds of one object."""

    object_id: int
    t: list[float]
    x: list[float]
    y: list[float]
    speed: list[float]

    @model_validator(mode="after")
    def check_lengths(self) -> "Trajectory":
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.speed) == n):
            raise ValueError("trajectory columns must have equal length")
        return self

    @classmethod
    def from_arrays(
        cls, object_id: int, t: np.ndarray, xy: np.ndarray, speed: np.ndarray
    ) -> "Trajectory":
        return cls(
            object_id=object_id,
            t=[float(v) for v in t],
            x=[float(v) for v in xy[:, 0]],
            y=[float(v) for v in xy[:, 1]],
            speed=[float(v) for v in speed],
        )

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack([self.x, self.y]).reshape(-1, 2)

    @property
    def end(self) -> Point:
        return (self.x[-1], self.y[-1])

    def __len__(self) -> int:
        return len(self.t)
