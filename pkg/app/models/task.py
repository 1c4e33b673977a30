"""
Task harness domain types: task descriptions, per-step records and reports.
"""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.field import Point


class TaskKind(str, Enum):
    """Manipulation task families."""

    PATH_FOLLOWING = "path_following"
    AGGREGATION = "aggregation"
    SORTING = "sorting"


class SwitchRule(str, Enum):
    """How the distance to the current waypoint is measured."""

    OBJECT = "object"
    MEAN = "mean"


class StepAction(str, Enum):
    """What the harness did in one control step."""

    MOVE = "move"
    HOLD = "hold"


class Zone(BaseModel):
    """Circular reference zone."""

    model_config = ConfigDict(frozen=True)

    name: str
    center: Point
    diameter: float = Field(gt=0.0)

    @property
    def radius(self) -> float:
        return self.diameter / 2.0


class TaskObject(BaseModel):
    """Initial placement and class of one object."""

    model_config = ConfigDict(frozen=True)

    object_id: int
    object_class: str = "tracer"
    position: Point
    zone: Optional[str] = None


class Workspace(BaseModel):
    """Rectangular region the objects must stay inside."""

    model_config = ConfigDict(frozen=True)

    x_min: float = -1.5
    x_max: float = 1.5
    y_min: float = -1.5
    y_max: float = 1.5

    @model_validator(mode="after")
    def check_extent(self) -> "Workspace":
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("workspace bounds must describe a non-empty rectangle")
        return self

    def contains(self, point: Point) -> bool:
        x, y = point
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


class TaskSpec(BaseModel):
    """A manipulation task: references, objects and switching rules."""

    model_config = ConfigDict(frozen=True)

    name: str = "task"
    kind: TaskKind
    path: list[Point] = Field(default_factory=list)
    waypoint_spacing: Optional[float] = Field(default=0.10, gt=0.0)
    zones: list[Zone] = Field(default_factory=list)
    objects: list[TaskObject]
    group_assignment: dict[str, str] = Field(default_factory=dict)
    switch_threshold: Optional[float] = Field(default=None, gt=0.0)
    switch_rule: Optional[SwitchRule] = None
    max_steps: int = Field(default=100, ge=1)
    workspace: Optional[Workspace] = None

    @model_validator(mode="after")
    def check_kind(self) -> "TaskSpec":
        if not self.objects:
            raise ValueError("a task needs at least one object")
        ids = [obj.object_id for obj in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("object ids must be unique")
        if self.kind is TaskKind.PATH_FOLLOWING:
            if len(self.path) < 2:
                raise ValueError("path following needs a polyline of two or more points")
            if (
                self.waypoint_spacing is not None
                and self.waypoint_spacing <= self.effective_threshold
            ):
                raise ValueError("waypoint spacing must exceed the switch threshold")
        elif self.kind is TaskKind.AGGREGATION:
            if len(self.zones) != 1:
                raise ValueError("aggregation needs exactly one zone")
        else:
            names = {zone.name for zone in self.zones}
            for obj in self.objects:
                zone = self.zone_name_for(obj)
                if zone is None or zone not in names:
                    raise ValueError(f"object {obj.object_id} has no valid zone")
        return self

    @property
    def is_multi_object(self) -> bool:
        return len(self.objects) > 1

    @property
    def effective_rule(self) -> SwitchRule:
        if self.switch_rule is not None:
            return self.switch_rule
        return SwitchRule.MEAN if self.is_multi_object else SwitchRule.OBJECT

    @property
    def effective_threshold(self) -> float:
        if self.switch_threshold is not None:
            return self.switch_threshold
        return 0.063 if self.is_multi_object else 0.04

    def zone_name_for(self, obj: TaskObject) -> Optional[str]:
        return obj.zone or self.group_assignment.get(obj.object_class)

    def zone(self, name: str) -> Zone:
        for zone in self.zones:
            if zone.name == name:
                return zone
        raise KeyError(name)


class StepRecord(BaseModel):
    """Everything observed and decided in one control step."""

    step: int
    action: StepAction
    waypoint_index: int
    pan_deg: Optional[float] = None
    tilt_deg: Optional[float] = None
    s_star: Optional[Point] = None
    cost: Optional[float] = None
    converged: bool = False
    positions_before: list[Point]
    predicted_positions: list[Point]
    positions_after: list[Point]
    errors: list[float]
    max_pairwise_distance: Optional[float] = None
    switched_after: bool = False


class TaskReport(BaseModel):
    """Outcome of a closed-loop run with path-following style metrics."""

    task_name: str
    kind: TaskKind
    steps: list[StepRecord]
    mean_error: float
    std_error: float
    max_error: float
    steps_used: int
    completed: bool
    failure_reason: Optional[str] = None
    final_positions: list[Point]
    waypoint_count: int
    error_convention: str
