import math

import numpy as np
import pytest

from app.core.errors import DomainError
from app.models import FieldGeometry, NozzleOrientation
from app.services.geometry import (
    orientation_for_stagnation,
    orientation_from_projection,
    projection_from_angles,
    projection_from_stagnation,
    projection_point,
    stagnation_from_projection,
    stagnation_points,
)


def _angle_diff(a: float, b: float) -> float:
    return abs((a - b + 180.0) % 360.0 - 180.0)


def test_projection_roundtrip_on_one_degree_grid(geometry):
    for tilt in range(0, 90):
        for pan in range(-175, 180, 5):
            o = NozzleOrientation(pan_deg=pan, tilt_deg=tilt)
            back = orientation_from_projection(projection_point(o, geometry), geometry)
            assert back.tilt_deg == pytest.approx(tilt, abs=1e-9)
            if tilt > 0:
                assert _angle_diff(back.pan_deg, pan) < 1e-9


def test_projection_at_zero_tilt_is_origin(geometry):
    assert projection_from_angles(37.0, 0.0, geometry) == (0.0, 0.0)


@pytest.mark.parametrize("tilt", [-1.0, 90.0, 120.0])
def test_projection_rejects_tilt_outside_range(geometry, tilt):
    with pytest.raises(DomainError):
        projection_from_angles(0.0, tilt, geometry)


@pytest.mark.parametrize("radius", [0.25, 0.5, 1.0])
def test_stagnation_offset_matches_scalar_formula(geometry, radius):
    sx, sy = stagnation_from_projection((radius, 0.0), geometry)
    expected = radius - geometry.a1 * radius**geometry.a2
    assert sx == pytest.approx(expected, abs=1e-12)
    assert sy == 0.0


def test_stagnation_lies_between_origin_and_projection(geometry):
    c = (0.6, -0.8)
    s = stagnation_from_projection(c, geometry)
    assert math.hypot(*s) < math.hypot(*c)
    # Same bearing
    assert math.atan2(s[1], s[0]) == pytest.approx(math.atan2(c[1], c[0]), abs=1e-12)


@pytest.mark.parametrize("radius", [0.05, 0.25, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("bearing", [0.0, 1.0, -2.5])
def test_stagnation_inverse_roundtrip(geometry, radius, bearing):
    c = (radius * math.cos(bearing), radius * math.sin(bearing))
    back = projection_from_stagnation(stagnation_from_projection(c, geometry), geometry)
    assert back == pytest.approx(c, abs=1e-6)


def test_stagnation_inverse_beyond_reach_raises(geometry):
    assert geometry.stagnation_limit == pytest.approx(1.706, abs=5e-3)
    with pytest.raises(DomainError):
        projection_from_stagnation((1.8, 0.0), geometry)


def test_projection_beyond_monotone_branch_raises(geometry):
    with pytest.raises(DomainError):
        stagnation_from_projection((geometry.monotone_limit + 0.1, 0.0), geometry)


def test_origin_maps_to_zero_tilt(geometry):
    o = orientation_for_stagnation((0.0, 0.0), geometry)
    assert o.tilt_deg == 0.0


def test_without_offset_stagnation_equals_projection():
    geometry = FieldGeometry(a1=0.0)
    assert projection_from_stagnation((0.3, 0.4), geometry) == (0.3, 0.4)
    assert math.isinf(geometry.monotone_limit)


def test_orientation_for_stagnation_places_stagnation_point(geometry):
    s = (-0.42, 0.25)
    o = orientation_for_stagnation(s, geometry)
    back = stagnation_points(np.array([o.pan_deg]), np.array([o.tilt_deg]), geometry)[0]
    assert tuple(back) == pytest.approx(s, abs=1e-9)


def test_vectorized_stagnation_matches_scalar(geometry):
    pans = np.array([-150.0, -30.0, 0.0, 90.0, 175.0])
    tilts = np.array([0.0, 10.0, 22.5, 45.0, 60.0])
    batch = stagnation_points(pans, tilts, geometry)
    for (pan, tilt), s in zip(zip(pans, tilts), batch):
        c = projection_from_angles(pan, tilt, geometry)
        assert tuple(s) == pytest.approx(stagnation_from_projection(c, geometry), abs=1e-12)
