import numpy as np
import pytest
from pydantic import ValidationError

from app.core.errors import DomainError, FieldFitError
from app.models import FitSettings, GridSource, SyntheticFieldSpec, VelocityGrid
from app.services.field_fit import build_field_model, fit_profiles, fuse_grids, grid_stagnation
from app.services.field_model import radial_speed
from app.services.synthetic import generate_synthetic_grid, spec_stagnation


def _grid(spec: SyntheticFieldSpec, geometry) -> tuple[VelocityGrid, tuple[float, float]]:
    return generate_synthetic_grid(spec, geometry), spec_stagnation(spec, geometry)


def test_synthetic_grid_has_requested_resolution(geometry):
    grid = generate_synthetic_grid(SyntheticFieldSpec(), geometry)
    assert len(grid.points) == 121
    assert grid.source is GridSource.SYNTHETIC
    assert grid.tilt_deg == 22.5


def test_noiseless_fit_recovers_coefficients(geometry):
    spec = SyntheticFieldSpec()
    grid, s = _grid(spec, geometry)
    fits = fit_profiles(grid, s)

    assert len(grid.points) == 121
    assert [fit.alpha_deg for fit in fits] == list(range(-180, 180))
    for fit in fits:
        truth = spec.profile_at(fit.alpha_deg, spec.tilt_deg)
        assert fit.profile.b1 == pytest.approx(truth.b1, rel=0.01), fit.alpha_deg
        assert fit.profile.b2 == pytest.approx(truth.b2, rel=0.01), fit.alpha_deg
        assert fit.profile.b3 == pytest.approx(truth.b3, rel=0.01), fit.alpha_deg


def _curve_errors(spec: SyntheticFieldSpec, fits) -> np.ndarray:
    r = np.linspace(0.05, 1.0, 96)
    errors = []
    for fit in fits:
        truth = radial_speed(spec.profile_at(fit.alpha_deg, spec.tilt_deg), r)
        errors.append(np.mean(np.abs(radial_speed(fit.profile, r) - truth) / truth))
    return np.array(errors)


def test_noisy_fit_predicts_speeds_within_ten_percent(geometry):
    spec = SyntheticFieldSpec(noise=0.05, seed=11)
    grid, s = _grid(spec, geometry)
    errors = _curve_errors(spec, fit_profiles(grid, s))

    assert errors.mean() < 0.10
    assert np.mean(errors < 0.10) >= 0.9


def test_fit_respects_decay_bounds(geometry):
    settings = FitSettings(decay_bounds=(0.05, 1.5))
    grid, s = _grid(SyntheticFieldSpec(), geometry)
    for fit in fit_profiles(grid, s, settings):
        assert 0.05 - 1e-9 <= -fit.profile.b2 <= 1.5 + 1e-9
        assert 0.02 <= fit.profile.peak_radius <= 1.0


def test_fit_settings_reject_inverted_bounds():
    with pytest.raises(ValidationError):
        FitSettings(ratio_bounds=(0.5, 2.0))
    with pytest.raises(ValidationError):
        FitSettings(decay_bounds=(2.0, 1.0))


def test_every_fit_satisfies_profile_invariants(geometry):
    spec = SyntheticFieldSpec(resolution=11, noise=0.05, seed=2)
    grid, s = _grid(spec, geometry)
    for fit in fit_profiles(grid, s):
        p = fit.profile
        assert p.b1 > 0.0 and p.b3 < p.b2 < 0.0
        assert fit.n_samples >= 3
        assert fit.half_width_deg <= 45.0
        assert 0.02 <= p.peak_radius <= 1.0


def test_fit_of_still_air_fails(geometry):
    grid = VelocityGrid(
        tilt_deg=0.0,
        source=GridSource.MEASUREMENT,
        points=[(0.1 * i, 0.1 * j, 0.0) for i in range(-3, 4) for j in range(-3, 4)],
    )
    with pytest.raises(FieldFitError):
        fit_profiles(grid, (0.0, 0.0))


def test_fit_with_empty_direction_names_the_bin(geometry):
    # Samples only to the east of s leave the western bins empty
    grid = VelocityGrid(
        tilt_deg=0.0,
        pan_deg=0.0,
        source=GridSource.MEASUREMENT,
        points=[(0.1 * i, 0.01 * j, 1.0 + 0.1 * i) for i in range(1, 6) for j in range(-2, 3)],
    )
    with pytest.raises(FieldFitError) as info:
        fit_profiles(grid, (0.0, 0.0))
    assert "alpha_deg" in info.value.context
    assert info.value.context["n_samples"] < 3


def test_fusion_weights_cfd_at_stagnation_point():
    points_meas = [(0.0, 0.0, 1.0), (1.0, 0.0, 1.0), (10.0, 0.0, 1.0)]
    points_cfd = [(0.0, 0.0, 3.0), (1.0, 0.0, 3.0), (10.0, 0.0, 3.0)]
    meas = VelocityGrid(tilt_deg=0.0, source=GridSource.MEASUREMENT, points=points_meas)
    cfd = VelocityGrid(tilt_deg=0.0, source=GridSource.CFD, points=points_cfd)

    fused = fuse_grids(meas, cfd, (0.0, 0.0), r0=0.2)
    speeds = fused.speeds
    assert fused.source is GridSource.FUSED
    assert speeds[0] == pytest.approx(3.0)
    assert speeds[1] == pytest.approx(1.0 + 2.0 * np.exp(-5.0))
    assert speeds[2] == pytest.approx(1.0, abs=1e-12)


def test_fusion_rejects_misaligned_grids():
    meas = VelocityGrid(tilt_deg=0.0, source=GridSource.MEASUREMENT, points=[(0.0, 0.0, 1.0)])
    cfd = VelocityGrid(tilt_deg=0.0, source=GridSource.CFD, points=[(0.5, 0.0, 1.0)])
    with pytest.raises(DomainError):
        fuse_grids(meas, cfd, (0.0, 0.0), r0=0.2)


def test_fusion_rejects_different_orientations_and_bad_scale():
    meas = VelocityGrid(tilt_deg=0.0, source=GridSource.MEASUREMENT, points=[(0.0, 0.0, 1.0)])
    cfd = VelocityGrid(tilt_deg=10.0, source=GridSource.CFD, points=[(0.0, 0.0, 1.0)])
    with pytest.raises(DomainError):
        fuse_grids(meas, cfd, (0.0, 0.0), r0=0.2)
    with pytest.raises(DomainError):
        fuse_grids(meas, meas, (0.0, 0.0), r0=0.0)


def test_build_field_model_stacks_tilts(geometry):
    grids = [
        generate_synthetic_grid(SyntheticFieldSpec(tilt_deg=tilt, resolution=21), geometry)
        for tilt in (22.5, 0.0)
    ]
    model, diagnostics = build_field_model(grids, geometry)

    assert model.tilt_nodes.tolist() == [0.0, 22.5]
    assert sorted(diagnostics) == [0.0, 22.5]
    spec = SyntheticFieldSpec(tilt_deg=22.5)
    for alpha in (-180, -90, 0, 90):
        expected = spec.profile_at(alpha, 22.5).b1
        assert model.profile(22.5, alpha).b1 == pytest.approx(expected, rel=0.02)


def test_build_field_model_rejects_duplicate_tilts(geometry):
    grid = generate_synthetic_grid(SyntheticFieldSpec(tilt_deg=0.0), geometry)
    with pytest.raises(FieldFitError):
        build_field_model([grid, grid], geometry)
    with pytest.raises(FieldFitError):
        build_field_model([], geometry)


def test_grid_stagnation_matches_generator(geometry):
    spec = SyntheticFieldSpec(tilt_deg=45.0, pan_deg=-30.0)
    grid = generate_synthetic_grid(spec, geometry)
    assert grid_stagnation(grid, geometry) == pytest.approx(spec_stagnation(spec, geometry))
