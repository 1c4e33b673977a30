"""
Analytical airflow field.

The floor-parallel air speed at a point ``p`` for a given nozzle orientation is
``v(r) = b1 * (exp(b2 r) - exp(b3 r))`` where ``r`` is the distance from the
stagnation point ``s`` and the coefficients depend on:

- the direction ``alpha`` of ``p - s`` measured relative to the pan angle,
  tabulated at 1 deg bins and interpolated linearly (periodic);
- the tilt angle, tabulated at a few nodes and interpolated with modified
  Akima (linear for two nodes, constant for one).

The flow points away from ``s``. Tilts outside the node range are clamped to
the nearest node and flagged, never extrapolated.
"""

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
from scipy.interpolate import Akima1DInterpolator

from app.core.errors import DomainError
from app.core.logging import get_logger
from app.models.field import FieldGeometry, NozzleOrientation, Point, RadialProfile
from app.services.geometry import stagnation_points

logger = get_logger(__name__)

N_ALPHA_BINS = 360
ALPHA_BINS_DEG = np.arange(-180, 180, dtype=float)

# Tilts closer than this to a node use the node's table as is
_NODE_SNAP_DEG = 1e-9


def radial_speed(profile: RadialProfile, r: float | np.ndarray) -> float | np.ndarray:
    """Evaluate the two-term exponential profile, clamped at 0 from below."""
    r = np.asarray(r, dtype=float)
    speed = profile.b1 * (np.exp(profile.b2 * r) - np.exp(profile.b3 * r))
    speed = np.maximum(speed, 0.0)
    return float(speed) if speed.ndim == 0 else speed


def profile_speed(coefficients: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Vectorized profile evaluation for coefficient arrays of shape (..., 3)."""
    b1, b2, b3 = coefficients[..., 0], coefficients[..., 1], coefficients[..., 2]
    return np.maximum(b1 * (np.exp(b2 * r) - np.exp(b3 * r)), 0.0)


def alpha_bin_weights(alpha_rel_deg: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lower bin index, upper bin index and upper weight for periodic linear interpolation."""
    position = np.mod(np.asarray(alpha_rel_deg, dtype=float) + 180.0, 360.0)
    lower = np.floor(position)
    frac = position - lower
    i0 = lower.astype(int) % N_ALPHA_BINS
    i1 = (i0 + 1) % N_ALPHA_BINS
    return i0, i1, frac


class OrientedAirflow(Protocol):
    """A field frozen at a batch of nozzle orientations."""

    stagnation: np.ndarray
    tilt_clamped: np.ndarray

    def speed_and_heading(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...


class AirflowField(Protocol):
    """Anything that can be oriented into an OrientedAirflow."""

    geometry: FieldGeometry

    def orient(self, pan_deg: np.ndarray, tilt_deg: np.ndarray) -> OrientedAirflow: ...


@dataclass(frozen=True)
class OrientedField:
    """
    Field model evaluated at B orientations.

    Attributes:
        stagnation: Stagnation points, shape (B, 2)
        pan_deg: Pan angles, shape (B,)
        table: Tilt-interpolated coefficient tables, shape (B, 360, 3)
        tilt_clamped: True where the requested tilt was outside the node range
    """

    stagnation: np.ndarray
    pan_deg: np.ndarray
    table: np.ndarray
    tilt_clamped: np.ndarray

    def coefficients(self, alpha_rel_deg: np.ndarray) -> np.ndarray:
        """Interpolated (b1, b2, b3) for directions of shape (B, M)."""
        i0, i1, frac = alpha_bin_weights(alpha_rel_deg)
        rows = np.arange(self.table.shape[0])[:, None]
        frac = frac[..., None]
        return (1.0 - frac) * self.table[rows, i0] + frac * self.table[rows, i1]

    def speed_and_heading(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        Air speed and unit flow direction at query points.

        Args:
            points: Query points, shape (B, M, 2)

        Returns:
            Speeds (B, M) and headings (B, M, 2); both are zero at the stagnation point
        """
        delta = points - self.stagnation[:, None, :]
        r = np.hypot(delta[..., 0], delta[..., 1])
        alpha_rel = np.degrees(np.arctan2(delta[..., 1], delta[..., 0])) - self.pan_deg[:, None]
        speed = profile_speed(self.coefficients(alpha_rel), r)
        safe_r = np.where(r > 0.0, r, 1.0)
        heading = np.where((r > 0.0)[..., None], delta / safe_r[..., None], 0.0)
        speed = np.where(r > 0.0, speed, 0.0)
        return speed, heading

    def velocity(self, points: np.ndarray) -> np.ndarray:
        speed, heading = self.speed_and_heading(points)
        return speed[..., None] * heading


class FieldModel:
    """
    Immutable table of radial profile coefficients per (tilt node, alpha bin).

    Args:
        geometry: Nozzle geometry constants
        tilt_nodes: Strictly increasing tilt angles in degrees
        table: Coefficients (b1, b2, b3), shape (len(tilt_nodes), 360, 3),
            alpha bins centered at -180 .. 179 deg relative to pan
    """

    def __init__(self, geometry: FieldGeometry, tilt_nodes: Sequence[float], table: np.ndarray):
        nodes = np.asarray(tilt_nodes, dtype=float)
        table = np.array(table, dtype=float)
        if nodes.ndim != 1 or nodes.size == 0:
            raise DomainError("a field model needs at least one tilt node")
        if np.any(np.diff(nodes) <= 0.0):
            raise DomainError("tilt nodes must be strictly increasing", tilt_nodes=nodes.tolist())
        if table.shape != (nodes.size, N_ALPHA_BINS, 3):
            raise DomainError(
                f"coefficient table has shape {table.shape}, "
                f"expected {(nodes.size, N_ALPHA_BINS, 3)}"
            )
        b1, b2, b3 = table[..., 0], table[..., 1], table[..., 2]
        bad = ~((b1 > 0.0) & (b2 < 0.0) & (b3 < b2))
        if np.any(bad):
            node, alpha = np.argwhere(bad)[0]
            raise DomainError(
                "radial profile must satisfy b1 > 0 and b3 < b2 < 0",
                tilt_deg=float(nodes[node]),
                alpha_deg=float(ALPHA_BINS_DEG[alpha]),
            )

        table.setflags(write=False)
        nodes.setflags(write=False)
        self.geometry = geometry
        self.tilt_nodes = nodes
        self.table = table
        self._spline = (
            Akima1DInterpolator(nodes, table, axis=0, method="makima") if nodes.size >= 3 else None
        )

    @classmethod
    def from_profiles(
        cls,
        geometry: FieldGeometry,
        profiles: dict[float, Sequence[RadialProfile]],
    ) -> "FieldModel":
        """Build from 360 profiles per tilt node, ordered by alpha bin."""
        nodes = sorted(profiles)
        table = np.array([[p.as_array() for p in profiles[node]] for node in nodes])
        return cls(geometry, nodes, table)

    def profile(self, tilt_deg: float, alpha_deg: int) -> RadialProfile:
        """Stored profile at a tilt node and an alpha bin center."""
        matches = np.flatnonzero(np.abs(self.tilt_nodes - tilt_deg) <= _NODE_SNAP_DEG)
        if matches.size == 0:
            raise DomainError(f"{tilt_deg} deg is not a tilt node", tilt_deg=tilt_deg)
        b1, b2, b3 = self.table[matches[0], (int(alpha_deg) + 180) % N_ALPHA_BINS]
        return RadialProfile(b1=b1, b2=b2, b3=b3)

    def tilt_table(self, tilt_deg: float) -> tuple[np.ndarray, bool]:
        """Coefficient table at one tilt and whether the tilt had to be clamped."""
        low, high = self.tilt_nodes[0], self.tilt_nodes[-1]
        clamped = bool(tilt_deg < low - _NODE_SNAP_DEG or tilt_deg > high + _NODE_SNAP_DEG)
        tilt = float(np.clip(tilt_deg, low, high))

        nearest = int(np.argmin(np.abs(self.tilt_nodes - tilt)))
        if abs(self.tilt_nodes[nearest] - tilt) <= _NODE_SNAP_DEG:
            return self.table[nearest], clamped
        if self._spline is not None:
            return self._spline(tilt), clamped

        # Two nodes: linear blend
        frac = (tilt - low) / (high - low)
        return (1.0 - frac) * self.table[0] + frac * self.table[1], clamped

    def orient(self, pan_deg: np.ndarray, tilt_deg: np.ndarray) -> OrientedField:
        """
        Freeze the field at B orientations.

        Out-of-range tilts are clamped to the nearest node before anything is
        evaluated, so the stagnation point and the coefficient table both come
        from the clamped tilt.
        """
        pan = np.atleast_1d(np.asarray(pan_deg, dtype=float))
        requested = np.atleast_1d(np.asarray(tilt_deg, dtype=float))
        low, high = self.tilt_nodes[0], self.tilt_nodes[-1]
        clamped = (requested < low - _NODE_SNAP_DEG) | (requested > high + _NODE_SNAP_DEG)
        tilt = np.clip(requested, low, high)
        tables = [self.tilt_table(t)[0] for t in tilt]
        if np.any(clamped):
            logger.warning(
                f"Tilt outside node range [{self.tilt_nodes[0]}, {self.tilt_nodes[-1]}] deg "
                f"clamped for {int(clamped.sum())} orientation(s)"
            )
        return OrientedField(
            stagnation=stagnation_points(pan, tilt, self.geometry),
            pan_deg=pan,
            table=np.stack(tables),
            tilt_clamped=clamped,
        )

    def orient_one(self, orientation: NozzleOrientation) -> OrientedField:
        return self.orient(np.array([orientation.pan_deg]), np.array([orientation.tilt_deg]))


@dataclass(frozen=True)
class AirVelocity:
    """Air velocity at one point; ``tilt_clamped`` is set when the tilt left the node range."""

    velocity: np.ndarray
    tilt_clamped: bool

    @property
    def speed(self) -> float:
        return float(np.hypot(self.velocity[0], self.velocity[1]))


def air_velocity(model: AirflowField, orientation: NozzleOrientation, p: Point) -> AirVelocity:
    """Air velocity vector (vx, vy) at ``p`` for one orientation."""
    oriented = model.orient(np.array([orientation.pan_deg]), np.array([orientation.tilt_deg]))
    speed, heading = oriented.speed_and_heading(np.asarray(p, dtype=float).reshape(1, 1, 2))
    return AirVelocity(
        velocity=speed[0, 0] * heading[0, 0],
        tilt_clamped=bool(oriented.tilt_clamped[0]),
    )


@dataclass(frozen=True)
class StillAir:
    """No actuation: zero air speed everywhere."""

    stagnation: np.ndarray = field(default_factory=lambda: np.zeros((1, 2)))
    tilt_clamped: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=bool))

    def speed_and_heading(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return np.zeros(points.shape[:-1]), np.zeros(points.shape)
