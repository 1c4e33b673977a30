"""
Built-in manipulation tasks.

Paths are centered near the point below the nozzle so every stagnation point
the controller needs stays inside the tilt coverage of the default field.
"""

import math
from typing import Callable

from app.core.errors import TaskError
from app.models.field import Point
from app.models.task import TaskKind, TaskObject, TaskSpec, Zone

# Tracer disc diameter in m
TRACER_DIAMETER = 0.03


def _shift(points: list[Point], dx: float, dy: float) -> list[Point]:
    return [(x + dx, y + dy) for x, y in points]


def line_task() -> TaskSpec:
    """0.5 m straight line, one tracer."""
    path = [(0.0, 0.25), (0.5, 0.25)]
    return TaskSpec(
        name="line",
        kind=TaskKind.PATH_FOLLOWING,
        path=path,
        objects=[TaskObject(object_id=0, position=path[0])],
        max_steps=60,
    )


def square_task() -> TaskSpec:
    """Closed square with 0.5 m sides, one tracer."""
    half = 0.25
    path = [(-half, -half), (half, -half), (half, half), (-half, half), (-half, -half)]
    return TaskSpec(
        name="square",
        kind=TaskKind.PATH_FOLLOWING,
        path=path,
        objects=[TaskObject(object_id=0, position=path[0])],
        max_steps=150,
    )


def letter_a_task() -> TaskSpec:
    """Letter 'A' drawn as left stroke, right stroke, then the crossbar."""
    path = _shift([(0.0, 0.0), (0.3, 0.6), (0.6, 0.0), (0.45, 0.3), (0.15, 0.3)], -0.3, -0.3)
    return TaskSpec(
        name="letter_a",
        kind=TaskKind.PATH_FOLLOWING,
        path=path,
        objects=[TaskObject(object_id=0, position=path[0])],
        max_steps=150,
    )


def octagon_task(circumradius: float = 0.5) -> TaskSpec:
    """
    Four tracers in a tight row steered around an octagon, corner by corner.

    The octagon size is a chosen default, not a measured geometry.
    """
    corners = [
        (circumradius * math.cos(math.radians(45.0 * k)), circumradius * math.sin(math.radians(45.0 * k)))
        for k in range(9)
    ]
    start_x, start_y = corners[0]
    objects = [
        TaskObject(object_id=j, position=(start_x, start_y + (j - 1.5) * TRACER_DIAMETER))
        for j in range(4)
    ]
    return TaskSpec(
        name="octagon",
        kind=TaskKind.PATH_FOLLOWING,
        path=corners,
        waypoint_spacing=None,
        objects=objects,
        max_steps=200,
    )


def aggregation_task() -> TaskSpec:
    """25 tracers on a 5 x 5 grid with 0.2 m pitch, gathered into a 0.37 m zone."""
    objects = [
        TaskObject(object_id=5 * i + j, position=(-0.4 + 0.2 * j, -0.4 + 0.2 * i))
        for i in range(5)
        for j in range(5)
    ]
    return TaskSpec(
        name="aggregation",
        kind=TaskKind.AGGREGATION,
        zones=[Zone(name="target", center=(0.0, 0.0), diameter=0.37)],
        objects=objects,
        max_steps=150,
    )


def sorting_task() -> TaskSpec:
    """
    Three tracers and three cotton wads sorted into zones 1.25 m apart.

    The objects start mixed on a 0.15 m ring around the origin, alternating
    class every 60 degrees.
    """
    mixed = [
        (0.15 * math.cos(math.radians(60.0 * k)), 0.15 * math.sin(math.radians(60.0 * k)))
        for k in range(6)
    ]
    classes = ["tracer", "cotton"] * 3
    return TaskSpec(
        name="sorting",
        kind=TaskKind.SORTING,
        zones=[
            Zone(name="left", center=(-0.625, 0.0), diameter=0.21),
            Zone(name="right", center=(0.625, 0.0), diameter=0.21),
        ],
        objects=[
            TaskObject(object_id=j, object_class=cls, position=pos)
            for j, (pos, cls) in enumerate(zip(mixed, classes))
        ],
        group_assignment={"tracer": "left", "cotton": "right"},
        max_steps=100,
    )


PRESETS: dict[str, Callable[[], TaskSpec]] = {
    "line": line_task,
    "square": square_task,
    "letter_a": letter_a_task,
    "octagon": octagon_task,
    "aggregation": aggregation_task,
    "sorting": sorting_task,
}


def preset(name: str) -> TaskSpec:
    try:
        return PRESETS[name]()
    except KeyError:
        raise TaskError(f"unknown task preset '{name}'", known=sorted(PRESETS)) from None
