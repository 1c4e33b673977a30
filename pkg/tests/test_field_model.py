import math

import numpy as np
import pytest

from app.core.errors import DomainError
from app.models import NozzleOrientation, RadialProfile
from app.services.field_model import (
    ALPHA_BINS_DEG,
    N_ALPHA_BINS,
    FieldModel,
    StillAir,
    air_velocity,
    radial_speed,
)
from app.services.synthetic import UniformField, spec_stagnation

PROFILE = RadialProfile(b1=5.23, b2=-2.0, b3=-16.0)


def test_radial_speed_is_zero_at_stagnation_point():
    assert radial_speed(PROFILE, 0.0) == 0.0


def test_radial_profile_has_single_interior_peak_and_decays():
    r = np.linspace(0.0, 5.0, 50001)
    speed = radial_speed(PROFILE, r)
    peak = int(np.argmax(speed))
    assert r[peak] == pytest.approx(PROFILE.peak_radius, abs=1e-3)
    assert 0 < peak < r.size - 1
    diffs = np.diff(speed)
    assert np.all(diffs[:peak] >= 0.0)
    assert np.all(diffs[peak:] <= 0.0)


def test_radial_profile_rejects_unordered_decays():
    with pytest.raises(ValueError):
        RadialProfile(b1=1.0, b2=-3.0, b3=-2.0)


def test_table_lookup_at_node_is_identity(field_model):
    for k, node in enumerate(field_model.tilt_nodes):
        table, clamped = field_model.tilt_table(float(node))
        assert not clamped
        np.testing.assert_array_equal(table, field_model.table[k])


def test_tilt_interpolation_stays_between_nodes(field_model, field_spec):
    table, _ = field_model.tilt_table(30.0)
    b1_low = field_model.table[1, :, 0]
    b1_high = field_model.table[2, :, 0]
    lower = np.minimum(b1_low, b1_high) - 1e-9
    upper = np.maximum(b1_low, b1_high) + 1e-9
    assert np.all((table[:, 0] >= lower) & (table[:, 0] <= upper))


def test_tilt_outside_nodes_is_clamped_and_flagged(field_model):
    # 70 deg is past both the last node and the invertible projection radius
    oriented = field_model.orient(np.array([90.0]), np.array([70.0]))
    at_node = field_model.orient(np.array([90.0]), np.array([60.0]))
    assert oriented.tilt_clamped.tolist() == [True]
    np.testing.assert_array_equal(oriented.table[0], field_model.table[-1])
    np.testing.assert_allclose(oriented.stagnation, at_node.stagnation)


def test_clamped_air_velocity_is_flagged(field_model):
    p = (0.3, 1.2)
    clamped = air_velocity(field_model, NozzleOrientation(pan_deg=90.0, tilt_deg=70.0), p)
    at_node = air_velocity(field_model, NozzleOrientation(pan_deg=90.0, tilt_deg=60.0), p)
    assert clamped.tilt_clamped
    assert not at_node.tilt_clamped
    np.testing.assert_allclose(clamped.velocity, at_node.velocity)


def test_single_node_model_is_constant_in_tilt(geometry):
    table = np.tile(PROFILE.as_array(), (1, N_ALPHA_BINS, 1))
    model = FieldModel(geometry, [0.0], table)
    np.testing.assert_array_equal(model.tilt_table(0.0)[0], table[0])
    assert model.tilt_table(30.0)[1]


def test_two_node_model_interpolates_linearly(geometry):
    low = np.tile([4.0, -2.0, -16.0], (N_ALPHA_BINS, 1))
    high = np.tile([6.0, -2.0, -16.0], (N_ALPHA_BINS, 1))
    model = FieldModel(geometry, [0.0, 40.0], np.stack([low, high]))
    table, clamped = model.tilt_table(10.0)
    assert not clamped
    assert table[0, 0] == pytest.approx(4.5)


def test_invalid_coefficient_table_is_rejected(geometry):
    table = np.tile(PROFILE.as_array(), (1, N_ALPHA_BINS, 1))
    table[0, 12] = [1.0, -3.0, -2.0]
    with pytest.raises(DomainError) as info:
        FieldModel(geometry, [0.0], table)
    assert info.value.context["alpha_deg"] == ALPHA_BINS_DEG[12]


def test_unsorted_tilt_nodes_are_rejected(geometry):
    table = np.tile(PROFILE.as_array(), (2, N_ALPHA_BINS, 1))
    with pytest.raises(DomainError):
        FieldModel(geometry, [20.0, 10.0], table)


def test_stored_table_is_read_only(field_model):
    with pytest.raises(ValueError):
        field_model.table[0, 0, 0] = 1.0


def test_flow_points_away_from_stagnation_point(field_model, geometry):
    rng = np.random.default_rng(7)
    pan, tilt = 35.0, 30.0
    oriented = field_model.orient(np.array([pan]), np.array([tilt]))
    points = rng.uniform(-1.5, 1.5, size=(1, 10_000, 2))
    velocity = oriented.velocity(points)
    outward = points - oriented.stagnation[:, None, :]
    dots = np.sum(velocity * outward, axis=-1)
    assert np.all(dots >= -1e-12)


def test_pan_rotation_equivariance(field_model):
    rng = np.random.default_rng(3)
    points = rng.uniform(-1.0, 1.0, size=(200, 2))
    theta = 37.0
    rot = math.radians(theta)
    rotation = np.array([[math.cos(rot), -math.sin(rot)], [math.sin(rot), math.cos(rot)]])

    base = field_model.orient(np.array([90.0]), np.array([22.5]))
    turned = field_model.orient(np.array([90.0 + theta]), np.array([22.5]))
    v_base = base.velocity(points[None])[0]
    v_turned = turned.velocity((points @ rotation.T)[None])[0]
    np.testing.assert_allclose(v_turned, v_base @ rotation.T, atol=1e-9)


def test_air_velocity_matches_generator_profile(field_model, field_spec, geometry):
    s = spec_stagnation(field_spec, geometry)
    # Straight along the pan direction (alpha = 0), 0.3 m from s
    p = (s[0], s[1] + 0.3)
    result = air_velocity(field_model, NozzleOrientation(pan_deg=90.0, tilt_deg=22.5), p)
    expected = radial_speed(field_spec.profile_at(0.0, 22.5), 0.3)
    assert not result.tilt_clamped
    assert result.velocity[0] == pytest.approx(0.0, abs=1e-9)
    assert result.velocity[1] == pytest.approx(expected, rel=1e-9)
    assert result.speed == pytest.approx(expected, rel=1e-9)


def test_air_velocity_interpolates_between_alpha_bins(field_model, field_spec, geometry):
    s = spec_stagnation(field_spec, geometry)
    # alpha = 0.5 deg relative to pan: halfway between the 0 and 1 deg bins
    angle = math.radians(90.0 + 0.5)
    p = (s[0] + 0.3 * math.cos(angle), s[1] + 0.3 * math.sin(angle))
    result = air_velocity(field_model, NozzleOrientation(pan_deg=90.0, tilt_deg=22.5), p)

    low = field_model.profile(22.5, 0).as_array()
    high = field_model.profile(22.5, 1).as_array()
    b1, b2, b3 = 0.5 * (low + high)
    expected = b1 * (math.exp(b2 * 0.3) - math.exp(b3 * 0.3))
    assert result.speed == pytest.approx(expected, rel=1e-9)


def test_field_is_stronger_in_the_pan_direction_when_tilted(field_model):
    forward = field_model.profile(22.5, 0).b1
    backward = field_model.profile(22.5, -180).b1
    assert forward > backward
    assert field_model.profile(0.0, 0).b1 == pytest.approx(field_model.profile(0.0, -180).b1)


def test_air_speed_is_zero_at_stagnation_point(field_model):
    oriented = field_model.orient(np.array([0.0]), np.array([45.0]))
    speed, heading = oriented.speed_and_heading(oriented.stagnation[:, None, :])
    assert speed[0, 0] == 0.0
    np.testing.assert_array_equal(heading[0, 0], [0.0, 0.0])


def test_still_air_and_uniform_field():
    points = np.zeros((2, 3, 2))
    speed, heading = StillAir().speed_and_heading(points)
    assert speed.shape == (2, 3) and not speed.any() and not heading.any()

    oriented = UniformField(3.0).orient(np.array([0.0]), np.array([0.0]))
    speed, heading = oriented.speed_and_heading(np.array([[[0.0, 2.0], [0.0, 0.0]]]))
    assert speed[0].tolist() == [3.0, 0.0]
    np.testing.assert_allclose(heading[0, 0], [0.0, 1.0])
