"""
Synthetic ground truth standing in for anemometer and CFD data.

- build_field_model tabulates a SyntheticFieldSpec exactly at the model bins.
- generate_synthetic_grid samples the same field on a square grid.
- generate_synthetic_trajectories releases objects in an annulus around the
  stagnation point and records them at the camera rate.
- generate_synthetic_snapshots draws one-step transitions of the discrete
  speed map directly, for identification checks that must not depend on
  time discretization.
- UniformField blows at one constant speed everywhere.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from app.core.logging import get_logger
from app.models.dynamics import DynamicsModel, ObjectState, SimConfig, Trajectory
from app.models.field import (
    FieldGeometry,
    GridSource,
    NozzleOrientation,
    Point,
    SyntheticFieldSpec,
    VelocityGrid,
)
from app.models.sindy import SnapshotData
from app.services.dynamics import simulate
from app.services.field_model import ALPHA_BINS_DEG, AirflowField, FieldModel
from app.services.geometry import projection_from_angles, stagnation_from_projection, stagnation_points

logger = get_logger(__name__)


def spec_stagnation(spec: SyntheticFieldSpec, geometry: FieldGeometry) -> Point:
    if spec.stagnation is not None:
        return spec.stagnation
    c = projection_from_angles(spec.pan_deg, spec.tilt_deg, geometry)
    return stagnation_from_projection(c, geometry)


def build_field_model(
    spec: SyntheticFieldSpec, geometry: FieldGeometry, tilt_nodes: Sequence[float]
) -> FieldModel:
    """Field model whose stored profiles are the generator's profiles at every bin."""
    profiles = {
        float(tilt): [spec.profile_at(alpha, tilt) for alpha in ALPHA_BINS_DEG]
        for tilt in tilt_nodes
    }
    return FieldModel.from_profiles(geometry, profiles)


def generate_synthetic_grid(
    spec: SyntheticFieldSpec, geometry: FieldGeometry, seed: Optional[int] = None
) -> VelocityGrid:
    """
    Sample the generator field on a ``resolution x resolution`` grid centered on s.

    Multiplicative Gaussian noise of relative size ``spec.noise`` is applied
    and speeds are clamped at 0; the output is deterministic per seed.
    """
    s = np.asarray(spec_stagnation(spec, geometry))
    axis = np.linspace(-spec.half_extent, spec.half_extent, spec.resolution)
    gx, gy = np.meshgrid(s[0] + axis, s[1] + axis, indexing="xy")
    xy = np.column_stack([gx.ravel(), gy.ravel()])

    delta = xy - s
    r = np.hypot(delta[:, 0], delta[:, 1])
    alpha_rel = np.degrees(np.arctan2(delta[:, 1], delta[:, 0])) - spec.pan_deg
    scale = 1.0 + spec.asymmetry * math.sin(math.radians(spec.tilt_deg)) * np.cos(
        np.radians(alpha_rel)
    )
    speed = spec.b1 * scale * (np.exp(spec.b2 * r) - np.exp(spec.b3 * r))
    speed = np.where(r > 0.0, np.maximum(speed, 0.0), 0.0)

    if spec.noise > 0.0:
        rng = np.random.default_rng(spec.seed if seed is None else seed)
        speed = np.maximum(speed * (1.0 + rng.normal(0.0, spec.noise, size=speed.shape)), 0.0)

    logger.info(
        f"Generated {spec.resolution}x{spec.resolution} synthetic grid at tilt "
        f"{spec.tilt_deg} deg, noise {spec.noise}"
    )
    return VelocityGrid(
        tilt_deg=spec.tilt_deg,
        pan_deg=spec.pan_deg,
        source=GridSource.SYNTHETIC,
        points=[(float(x), float(y), float(v)) for (x, y), v in zip(xy, speed)],
    )


def annulus_placements(
    center: Point, count: int, r_min: float, r_max: float, rng: np.random.Generator
) -> np.ndarray:
    """Points uniformly distributed (by area) in an annulus, shape (count, 2)."""
    radius = np.sqrt(rng.uniform(r_min**2, r_max**2, size=count))
    angle = rng.uniform(-math.pi, math.pi, size=count)
    return np.column_stack(
        [center[0] + radius * np.cos(angle), center[1] + radius * np.sin(angle)]
    )


def generate_synthetic_trajectories(
    dynamics: DynamicsModel,
    field: AirflowField,
    orientations: Sequence[NozzleOrientation],
    count: int,
    sim: SimConfig,
    seed: int = 0,
    duration: float = 2.0,
    r_min: float = 0.20,
    r_max: float = 0.58,
    placements: Optional[np.ndarray] = None,
) -> list[tuple[Trajectory, NozzleOrientation]]:
    """
    Release ``count`` objects at rest per orientation and record their motion.

    Args:
        dynamics: Object class to simulate
        field: Airflow field
        orientations: Nozzle orientations; ``count`` trajectories each
        count: Trajectories per orientation
        sim: Simulation settings (noise level, output rate)
        seed: Seed for placements and plant noise
        duration: Recording length in seconds
        r_min, r_max: Annulus around the stagnation point for random placements
        placements: Explicit initial positions, shape (count, 2), used for
            every orientation instead of random placements

    Returns:
        (trajectory, orientation) pairs; object ids are unique across orientations
    """
    rng = np.random.default_rng(seed)
    records: list[tuple[Trajectory, NozzleOrientation]] = []
    for k, orientation in enumerate(orientations):
        s = stagnation_points(
            np.array([orientation.pan_deg]), np.array([orientation.tilt_deg]), field.geometry
        )[0]
        starts = (
            np.asarray(placements, dtype=float)
            if placements is not None
            else annulus_placements((s[0], s[1]), count, r_min, r_max, rng)
        )
        objects = [
            ObjectState(
                object_id=k * count + j,
                position=(float(x), float(y)),
                speed=0.0,
                dynamics=dynamics,
            )
            for j, (x, y) in enumerate(starts)
        ]
        trajectories = simulate(objects, field, orientation, duration, sim, rng=rng)
        records.extend((trajectory, orientation) for trajectory in trajectories)

    logger.info(
        f"Generated {len(records)} synthetic '{dynamics.label}' trajectories "
        f"({len(orientations)} orientation(s), noise {sim.noise_sigma})"
    )
    return records


def generate_synthetic_snapshots(
    dynamics: DynamicsModel,
    n_rows: int,
    dt: float = 0.025,
    noise: float = 0.0,
    seed: int = 0,
    v_max: float = 2.0,
    a_max: float = 4.0,
) -> SnapshotData:
    """
    Draw transitions of the forward-difference speed map.

    ``v_next = v + dt * (xi1 v + xi2 a + xi3)`` with ``v`` and ``a`` uniform on
    ``[0, v_max]`` and ``[0, a_max]``. Rows whose next speed would be clamped at
    zero are redrawn, so every row follows the linear map exactly before noise.
    """
    rng = np.random.default_rng(seed)
    v_now = np.empty(0)
    v_air = np.empty(0)
    while v_now.size < n_rows:
        v = rng.uniform(0.0, v_max, size=n_rows)
        a = rng.uniform(0.0, a_max, size=n_rows)
        nxt = v + dt * (dynamics.xi1 * v + dynamics.xi2 * a + dynamics.xi3)
        keep = nxt > 1e-3
        v_now = np.concatenate([v_now, v[keep]])
        v_air = np.concatenate([v_air, a[keep]])
    v_now, v_air = v_now[:n_rows], v_air[:n_rows]
    v_next = v_now + dt * (dynamics.xi1 * v_now + dynamics.xi2 * v_air + dynamics.xi3)
    if noise > 0.0:
        v_next = np.maximum(v_next * (1.0 + rng.normal(0.0, noise, size=n_rows)), 0.0)
    return SnapshotData.from_arrays(v_now, v_next, v_air, dt)


@dataclass(frozen=True)
class UniformOrientedField:
    stagnation: np.ndarray
    tilt_clamped: np.ndarray
    speed: float

    def speed_and_heading(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        delta = points - self.stagnation[:, None, :]
        r = np.hypot(delta[..., 0], delta[..., 1])
        safe_r = np.where(r > 0.0, r, 1.0)
        heading = np.where((r > 0.0)[..., None], delta / safe_r[..., None], 0.0)
        return np.where(r > 0.0, self.speed, 0.0), heading


class UniformField:
    """Radial outflow of one constant magnitude from the stagnation point."""

    def __init__(self, speed: float, geometry: Optional[FieldGeometry] = None):
        if speed < 0.0:
            raise ValueError("speed must be >= 0")
        self.speed = speed
        self.geometry = geometry or FieldGeometry()

    def orient(self, pan_deg: np.ndarray, tilt_deg: np.ndarray) -> UniformOrientedField:
        pan = np.atleast_1d(np.asarray(pan_deg, dtype=float))
        tilt = np.atleast_1d(np.asarray(tilt_deg, dtype=float))
        return UniformOrientedField(
            stagnation=stagnation_points(pan, tilt, self.geometry),
            tilt_clamped=np.zeros(pan.size, dtype=bool),
            speed=self.speed,
        )
