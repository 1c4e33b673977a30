"""
Nozzle geometry: projection and stagnation points on the floor.

- The projection point ``c`` is where the nozzle axis meets the floor.
- The stagnation point ``s`` lies on the ray from the origin (directly below
  the nozzle) to ``c``, shifted toward the origin by ``a1 * ||c||**a2``.
- Both maps are invertible; the stagnation inverse is only defined on the
  branch where ``||s||`` grows with ``||c||``.
"""

import math

import numpy as np
from scipy.optimize import root_scalar

from app.core.errors import DomainError
from app.models.field import FieldGeometry, NozzleOrientation, Point

# Absolute tolerance on ||c|| when inverting the stagnation offset
_INVERSE_XTOL = 1e-12


def projection_from_angles(pan_deg: float, tilt_deg: float, geometry: FieldGeometry) -> Point:
    """Projection point for raw servo angles, validating the tilt."""
    if not 0.0 <= tilt_deg < 90.0:
        raise DomainError(
            f"tilt {tilt_deg} deg has no projection point (must be in [0, 90))",
            tilt_deg=tilt_deg,
        )
    radius = geometry.h * math.tan(math.radians(tilt_deg))
    pan = math.radians(pan_deg)
    return (radius * math.cos(pan), radius * math.sin(pan))


def projection_point(orientation: NozzleOrientation, geometry: FieldGeometry) -> Point:
    return projection_from_angles(orientation.pan_deg, orientation.tilt_deg, geometry)


def orientation_from_projection(c: Point, geometry: FieldGeometry) -> NozzleOrientation:
    """Servo angles aiming the nozzle at ``c``; pan is 0 at the origin."""
    x, y = c
    radius = math.hypot(x, y)
    pan_deg = math.degrees(math.atan2(y, x)) if radius > 0.0 else 0.0
    tilt_deg = math.degrees(math.atan(radius / geometry.h))
    return NozzleOrientation(pan_deg=pan_deg, tilt_deg=tilt_deg)


def stagnation_offset(radius: float, geometry: FieldGeometry) -> float:
    """||c - s|| for a projection point at ``radius`` from the origin."""
    return geometry.a1 * radius**geometry.a2


def stagnation_from_projection(c: Point, geometry: FieldGeometry) -> Point:
    x, y = c
    radius = math.hypot(x, y)
    if radius == 0.0:
        return (0.0, 0.0)
    limit = geometry.monotone_limit
    if radius > limit:
        raise DomainError(
            f"projection radius {radius:.6g} m exceeds the invertible limit {limit:.6g} m",
            radius=radius,
            limit=limit,
        )
    scale = 1.0 - stagnation_offset(radius, geometry) / radius
    return (x * scale, y * scale)


def projection_from_stagnation(s: Point, geometry: FieldGeometry) -> Point:
    """Invert the stagnation offset by bracketing on ``[0, monotone_limit]``."""
    x, y = s
    radius = math.hypot(x, y)
    if radius == 0.0:
        return (0.0, 0.0)
    if geometry.a1 == 0.0:
        return (x, y)

    limit = geometry.monotone_limit
    reachable = geometry.stagnation_limit
    if radius > reachable:
        raise DomainError(
            f"stagnation radius {radius:.6g} m is beyond the reachable {reachable:.6g} m",
            radius=radius,
            limit=reachable,
        )

    def _fun(r: float) -> float:
        return r - stagnation_offset(r, geometry) - radius

    sol = root_scalar(_fun, bracket=(0.0, limit), method="brentq", xtol=_INVERSE_XTOL)
    if not sol.converged:
        raise DomainError(
            f"no projection radius found for stagnation radius {radius:.6g} m",
            radius=radius,
        )
    scale = sol.root / radius
    return (x * scale, y * scale)


def orientation_for_stagnation(s: Point, geometry: FieldGeometry) -> NozzleOrientation:
    """Nozzle orientation that places the stagnation point at ``s``."""
    return orientation_from_projection(projection_from_stagnation(s, geometry), geometry)


def stagnation_points(
    pan_deg: np.ndarray, tilt_deg: np.ndarray, geometry: FieldGeometry
) -> np.ndarray:
    """
    Vectorized forward map from servo angles to stagnation points.

    Args:
        pan_deg: Pan angles, shape (B,)
        tilt_deg: Tilt angles in [0, 90), shape (B,)
        geometry: Nozzle geometry

    Returns:
        Stagnation points, shape (B, 2)
    """
    tilt = np.radians(np.asarray(tilt_deg, dtype=float))
    pan = np.radians(np.asarray(pan_deg, dtype=float))
    if np.any((tilt < 0.0) | (tilt >= np.pi / 2)):
        raise DomainError("tilt angles must lie in [0, 90) deg")
    radius = geometry.h * np.tan(tilt)
    if np.any(radius > geometry.monotone_limit):
        raise DomainError(
            "projection radius exceeds the invertible limit",
            limit=geometry.monotone_limit,
        )
    stagnation_radius = radius - geometry.a1 * radius**geometry.a2
    return np.column_stack([stagnation_radius * np.cos(pan), stagnation_radius * np.sin(pan)])
