import math

import numpy as np
import pytest

from app.core.errors import TaskError
from app.models import (
    COTTON_WAD,
    LINE_CEM,
    PLANE_CEM,
    TRACER,
    SimConfig,
    StepAction,
    TaskKind,
    TaskObject,
    TaskSpec,
    Workspace,
)
from app.services.presets import PRESETS, preset
from app.services.tasks import discretize_path, run_task

DYNAMICS = {"tracer": TRACER, "cotton": COTTON_WAD}


def _run(task: TaskSpec, field_model, sim: SimConfig = SimConfig(), **kwargs):
    return run_task(task, field_model, DYNAMICS, LINE_CEM, PLANE_CEM, sim, **kwargs)


def _check_step_invariants(report) -> None:
    for record in report.steps:
        if record.action is StepAction.MOVE:
            assert record.s_star is not None
            for position in record.positions_before:
                assert math.dist(record.s_star, position) >= LINE_CEM.delta_min
        else:
            assert record.pan_deg is None and record.s_star is None


def test_discretize_line_with_spacing():
    waypoints = discretize_path([(0.0, 0.25), (0.5, 0.25)], 0.1)
    assert waypoints.shape == (5, 2)
    np.testing.assert_allclose(waypoints[:, 0], [0.1, 0.2, 0.3, 0.4, 0.5])
    np.testing.assert_allclose(waypoints[-1], [0.5, 0.25])


def test_discretize_uneven_segment_uses_equal_parts():
    waypoints = discretize_path([(0.0, 0.0), (0.25, 0.0)], 0.1)
    np.testing.assert_allclose(waypoints[:, 0], [0.25 / 3, 0.5 / 3, 0.25])


def test_discretize_without_spacing_uses_vertices():
    path = [(0.0, 0.0), (0.3, 0.0), (0.3, 0.3)]
    np.testing.assert_array_equal(discretize_path(path, None), [[0.3, 0.0], [0.3, 0.3]])


def test_presets_are_valid():
    for name in PRESETS:
        task = preset(name)
        assert task.name == name
    assert len(preset("aggregation").objects) == 25
    assert preset("octagon").waypoint_spacing is None
    assert len(discretize_path(preset("octagon").path, None)) == 8


def test_unknown_preset_is_rejected():
    with pytest.raises(TaskError):
        preset("spiral")


def test_switching_defaults_depend_on_object_count():
    assert preset("line").effective_threshold == 0.04
    assert preset("octagon").effective_threshold == 0.063
    assert preset("octagon").effective_rule.value == "mean"


def test_spacing_must_exceed_switch_threshold():
    with pytest.raises(ValueError):
        TaskSpec(
            kind=TaskKind.PATH_FOLLOWING,
            path=[(0.0, 0.0), (0.5, 0.0)],
            waypoint_spacing=0.03,
            objects=[TaskObject(object_id=0, position=(0.0, 0.0))],
        )


def test_sorting_needs_a_zone_per_object():
    with pytest.raises(ValueError):
        TaskSpec(
            kind=TaskKind.SORTING,
            objects=[TaskObject(object_id=0, position=(0.0, 0.0))],
        )


def test_missing_dynamics_is_rejected(field_model):
    with pytest.raises(TaskError):
        run_task(preset("sorting"), field_model, {"tracer": TRACER}, LINE_CEM, PLANE_CEM, SimConfig())


def test_unreachable_object_holds_until_step_limit(field_model):
    task = TaskSpec(
        name="edge",
        kind=TaskKind.PATH_FOLLOWING,
        path=[(1.65, 0.0), (1.35, 0.0)],
        objects=[TaskObject(object_id=0, position=(1.65, 0.0))],
        max_steps=3,
        workspace=Workspace(x_min=-2.0, x_max=2.0, y_min=-2.0, y_max=2.0),
    )
    report = _run(task, field_model)

    assert not report.completed
    assert report.failure_reason == "not completed within 3 steps"
    assert report.steps_used == 3
    assert [r.action for r in report.steps] == [StepAction.HOLD] * 3
    assert report.final_positions == [(1.65, 0.0)]
    assert report.waypoint_count == 3


def test_leaving_the_workspace_fails_the_task(field_model):
    bounds = Workspace(x_min=-0.05, x_max=0.02, y_min=0.2, y_max=0.3)
    report = _run(preset("line"), field_model, workspace=bounds)

    assert not report.completed
    assert report.failure_reason == "object left the workspace"
    assert report.steps_used == 1


def test_noisy_runs_are_reproducible_per_seed(field_model):
    task = preset("line").model_copy(update={"max_steps": 3})
    noisy = SimConfig(noise_sigma=0.1)
    first = _run(task, field_model, noisy, seed=3)
    again = _run(task, field_model, noisy, seed=3)
    other = _run(task, field_model, noisy, seed=4)

    assert first.model_dump() == again.model_dump()
    assert first.final_positions != other.final_positions


@pytest.mark.slow
def test_line_task_completes(field_model):
    report = _run(preset("line"), field_model, seed=0)

    assert report.completed
    assert report.failure_reason is None
    assert report.waypoint_count == 5
    assert report.mean_error <= 0.05
    assert report.mean_error <= report.max_error
    assert report.steps_used == len(report.steps) <= 60
    _check_step_invariants(report)

    indices = [r.waypoint_index for r in report.steps]
    assert indices == sorted(indices)
    final = report.final_positions[0]
    assert math.dist(final, (0.5, 0.25)) < 0.04

    for record in report.steps:
        if record.action is StepAction.MOVE:
            assert math.dist(record.predicted_positions[0], record.positions_after[0]) < 1e-3


@pytest.mark.slow
def test_aggregation_steps_respect_safety_distance(field_model):
    task = preset("aggregation").model_copy(update={"max_steps": 3})
    report = _run(task, field_model, seed=1)

    assert report.steps_used <= 3
    assert report.waypoint_count == 1
    _check_step_invariants(report)
    for record in report.steps:
        assert record.max_pairwise_distance is not None
        assert len(record.errors) == 25


@pytest.mark.slow
def test_sorting_uses_planar_search(field_model):
    task = preset("sorting").model_copy(update={"max_steps": 2})
    report = _run(task, field_model, seed=2)

    assert report.kind is TaskKind.SORTING
    assert report.steps_used <= 2
    assert report.waypoint_count == 2
    _check_step_invariants(report)


def test_sorting_objects_start_clear_of_their_centroid():
    task = preset("sorting")
    positions = np.array([obj.position for obj in task.objects])
    centroid = positions.mean(axis=0)
    assert np.linalg.norm(positions - centroid, axis=1).min() >= PLANE_CEM.delta_min
    assert {obj.object_class for obj in task.objects} == {"tracer", "cotton"}


def _assert_finished(task: TaskSpec, report) -> None:
    assert report.completed, report.failure_reason
    assert report.failure_reason is None
    if task.kind is TaskKind.PATH_FOLLOWING:
        return
    for obj, position in zip(task.objects, report.final_positions):
        if task.kind is TaskKind.AGGREGATION:
            zone = task.zones[0]
        else:
            zone = task.zone(task.zone_name_for(obj))
        assert math.dist(position, zone.center) <= zone.radius


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(PRESETS))
def test_every_preset_runs_to_completion(name, field_model):
    task = preset(name)
    report = _run(task, field_model, seed=0)

    _assert_finished(task, report)
    assert report.steps_used <= task.max_steps
    _check_step_invariants(report)


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(PRESETS))
def test_noisy_plant_still_completes_most_runs(name, field_model):
    task = preset(name)
    baseline = _run(task, field_model, seed=0)
    assert baseline.completed
    budget = task.model_copy(update={"max_steps": 3 * baseline.steps_used})

    noisy = SimConfig(noise_sigma=0.1)
    successes = sum(_run(budget, field_model, noisy, seed=seed).completed for seed in range(20))
    assert successes >= 18
