"""
Closed-loop task execution in simulation.

Every control step:
1. picks the current reference point(s) for the task kind;
2. plans a stagnation point with the cross-entropy controller (line search
   anchored at the object farthest from the reference, or a planar search for
   sorting);
3. runs the plant for ``delta_T`` plus the actuation delay, holding the nozzle
   off when no feasible stagnation point exists;
4. reads back the new positions, logs errors and advances waypoints.
"""

import math
from typing import Mapping, Optional

import numpy as np

from app.core.errors import TaskError
from app.core.logging import get_logger
from app.models.cem import CemConfig, SamplingSpace
from app.models.dynamics import DynamicsModel, ObjectState, SimConfig
from app.models.field import NozzleOrientation, Point
from app.models.task import (
    StepAction,
    StepRecord,
    SwitchRule,
    TaskKind,
    TaskReport,
    TaskSpec,
    Workspace,
)
from app.services.cem import optimize
from app.services.dynamics import simulate
from app.services.field_model import AirflowField
from app.services.metrics import (
    ERROR_CONVENTION,
    distance_to_polyline,
    max_pairwise_distance,
    path_error_metrics,
)

logger = get_logger(__name__)


def discretize_path(path: list[Point], spacing: Optional[float]) -> np.ndarray:
    """
    Waypoints along a polyline, excluding its first vertex.

    Each segment is split into ``ceil(length / spacing)`` equal parts; without
    a spacing the remaining vertices are the waypoints.
    """
    vertices = np.asarray(path, dtype=float)
    if spacing is None:
        return vertices[1:]
    waypoints = []
    for start, end in zip(vertices[:-1], vertices[1:]):
        length = float(np.linalg.norm(end - start))
        parts = max(1, math.ceil(length / spacing - 1e-9))
        for k in range(1, parts + 1):
            waypoints.append(start + (end - start) * k / parts)
    return np.array(waypoints).reshape(-1, 2)


def _references(task: TaskSpec, waypoints: np.ndarray, index: int) -> np.ndarray:
    """One reference point per object."""
    m = len(task.objects)
    if task.kind is TaskKind.PATH_FOLLOWING:
        return np.repeat(waypoints[index][None, :], m, axis=0)
    if task.kind is TaskKind.AGGREGATION:
        return np.repeat(np.asarray(task.zones[0].center, dtype=float)[None, :], m, axis=0)
    return np.array([task.zone(task.zone_name_for(obj)).center for obj in task.objects], dtype=float)


def _sampling_space(task: TaskSpec, positions: np.ndarray, refs: np.ndarray) -> SamplingSpace:
    if task.kind is TaskKind.SORTING:
        return SamplingSpace.plane()
    distances = np.linalg.norm(positions - refs, axis=1)
    farthest = int(np.argmax(distances))
    anchor = (float(positions[farthest, 0]), float(positions[farthest, 1]))
    reference = (float(refs[farthest, 0]), float(refs[farthest, 1]))
    return SamplingSpace.line_away_from(anchor, reference)


def _switch_condition(task: TaskSpec, positions: np.ndarray, target: np.ndarray) -> bool:
    distances = np.linalg.norm(positions - target[None, :], axis=1)
    if task.effective_rule is SwitchRule.MEAN:
        return float(distances.mean()) < task.effective_threshold
    return bool(np.all(distances < task.effective_threshold))


def _in_zones(task: TaskSpec, positions: np.ndarray, refs: np.ndarray) -> bool:
    radii = np.array(
        [
            task.zones[0].radius
            if task.kind is TaskKind.AGGREGATION
            else task.zone(task.zone_name_for(obj)).radius
            for obj in task.objects
        ]
    )
    return bool(np.all(np.linalg.norm(positions - refs, axis=1) <= radii))


def _errors(task: TaskSpec, positions: np.ndarray, refs: np.ndarray) -> np.ndarray:
    if task.kind is TaskKind.PATH_FOLLOWING:
        return distance_to_polyline(positions, task.path)
    return np.linalg.norm(positions - refs, axis=1)


def _points(array: np.ndarray) -> list[Point]:
    return [(float(x), float(y)) for x, y in array]


def run_task(
    task: TaskSpec,
    field: AirflowField,
    dynamics: Mapping[str, DynamicsModel],
    cem_line: CemConfig,
    cem_plane: CemConfig,
    sim: SimConfig,
    workspace: Optional[Workspace] = None,
    seed: int = 0,
) -> TaskReport:
    """
    Execute a task until completion, failure or ``task.max_steps``.

    Args:
        task: Task description
        field: Airflow field used by both planner and plant
        dynamics: Dynamics per object class
        cem_line: Controller settings for line search
        cem_plane: Controller settings for planar search (sorting)
        sim: Plant settings (noise, delay, tolerances)
        workspace: Bounds objects must stay inside; the task's own bounds win
        seed: Master seed; each step derives its controller and plant streams

    Returns:
        TaskReport with the step log and error metrics

    Raises:
        TaskError: If an object class has no dynamics
    """
    missing = sorted({obj.object_class for obj in task.objects} - set(dynamics))
    if missing:
        raise TaskError(f"no dynamics for object class(es) {missing}", classes=missing)
    bounds = task.workspace or workspace
    cem_cfg = cem_plane if task.kind is TaskKind.SORTING else cem_line

    waypoints = (
        discretize_path(task.path, task.waypoint_spacing)
        if task.kind is TaskKind.PATH_FOLLOWING
        else np.zeros((1, 2))
    )
    states = [
        ObjectState(
            object_id=obj.object_id,
            position=obj.position,
            speed=0.0,
            dynamics=dynamics[obj.object_class],
        )
        for obj in task.objects
    ]
    logger.info(
        f"Running task '{task.name}' ({task.kind.value}, {len(states)} object(s), "
        f"{len(waypoints)} reference point(s))"
    )

    index = 0
    completed = False
    failure: Optional[str] = None
    previous: Optional[NozzleOrientation] = None
    records: list[StepRecord] = []

    for step in range(task.max_steps):
        positions = np.array([state.position for state in states], dtype=float)
        reference_index = index
        refs = _references(task, waypoints, index)
        space = _sampling_space(task, positions, refs)
        cem_seed, plant_seed = np.random.SeedSequence([seed, step]).spawn(2)

        outcome = optimize(
            space, states, _points(refs), field, cem_cfg, sim, rng=np.random.default_rng(cem_seed)
        )
        orientation = outcome.orientation if outcome.feasible else None
        action = StepAction.MOVE if orientation is not None else StepAction.HOLD
        if action is StepAction.HOLD:
            logger.warning(f"Step {step}: no feasible stagnation point, holding")

        trajectories = simulate(
            states,
            field,
            orientation,
            cem_cfg.delta_T + sim.delay_s,
            sim,
            previous=previous,
            rng=np.random.default_rng(plant_seed),
        )
        previous = orientation
        states = [
            state.model_copy(
                update={"position": trajectory.end, "speed": max(trajectory.speed[-1], 0.0)}
            )
            for state, trajectory in zip(states, trajectories)
        ]
        after = np.array([state.position for state in states], dtype=float)
        errors = _errors(task, after, refs)

        switched = False
        if task.kind is TaskKind.PATH_FOLLOWING:
            while index < len(waypoints) and _switch_condition(task, after, waypoints[index]):
                index += 1
                switched = True
            completed = index >= len(waypoints)
        else:
            completed = _in_zones(task, after, refs)

        records.append(
            StepRecord(
                step=step,
                action=action,
                waypoint_index=reference_index,
                pan_deg=orientation.pan_deg if orientation else None,
                tilt_deg=orientation.tilt_deg if orientation else None,
                s_star=outcome.s_star if orientation else None,
                cost=outcome.best_cost,
                converged=outcome.converged,
                positions_before=_points(positions),
                predicted_positions=outcome.predicted_positions,
                positions_after=_points(after),
                errors=errors.tolist(),
                max_pairwise_distance=max_pairwise_distance(after) if len(states) > 1 else None,
                switched_after=switched,
            )
        )
        logger.info(
            f"Step {step}: {action.value}, cost {outcome.best_cost:.4f}, "
            f"mean error {errors.mean():.4f} m, reference {reference_index}"
        )

        if bounds is not None and not all(bounds.contains(state.position) for state in states):
            failure = "object left the workspace"
            completed = False
            logger.warning(f"Step {step}: {failure}")
            break
        if completed:
            break

    if not completed and failure is None:
        failure = f"not completed within {task.max_steps} steps"

    mean_error, std_error, max_error = path_error_metrics([r.errors for r in records])
    logger.info(
        f"Task '{task.name}' {'completed' if completed else 'failed'} after {len(records)} "
        f"step(s): mean error {mean_error:.4f} m, max {max_error:.4f} m"
    )
    return TaskReport(
        task_name=task.name,
        kind=task.kind,
        steps=records,
        mean_error=mean_error,
        std_error=std_error,
        max_error=max_error,
        steps_used=len(records),
        completed=completed,
        failure_reason=failure,
        final_positions=[state.position for state in states],
        waypoint_count=len(waypoints) if task.kind is TaskKind.PATH_FOLLOWING else len(task.zones),
        error_convention=ERROR_CONVENTION,
    )
