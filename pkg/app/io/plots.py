"""
Static SVG rendering of logged runs.

Plots are pure serializations of trajectories and step logs; the same input
always produces the same file.
"""

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from app.core.logging import get_logger  # noqa: E402
from app.models.dynamics import Trajectory  # noqa: E402
from app.models.field import Point  # noqa: E402
from app.models.task import StepAction, TaskKind, TaskReport, TaskSpec  # noqa: E402
from app.services.tasks import discretize_path  # noqa: E402

logger = get_logger(__name__)

_SVG_RC = {"svg.hashsalt": "airflow", "svg.fonttype": "none"}


def _save(fig: plt.Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Wrote {path}")
    return path


def plot_trajectories(
    trajectories: Sequence[Trajectory], path: Path, stagnation: Optional[Point] = None
) -> Path:
    """Object paths on the floor plane, start and end marked."""
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(6, 6))
        for trajectory in trajectories:
            xy = trajectory.xy
            ax.plot(xy[:, 0], xy[:, 1], linewidth=1.2, label=f"object {trajectory.object_id}")
            ax.plot(xy[0, 0], xy[0, 1], "o", color="gray", markersize=4)
            ax.plot(xy[-1, 0], xy[-1, 1], "s", color="black", markersize=4)
        if stagnation is not None:
            ax.plot(*stagnation, "x", color="red", markersize=9, label="stagnation point")
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
        ax.set_aspect("equal")
        ax.grid(True, alpha=0.3)
        if len(trajectories) <= 10:
            ax.legend(loc="best", fontsize=8)
        return _save(fig, path)


def plot_task_report(task: TaskSpec, report: TaskReport, path: Path) -> Path:
    """Reference path or zones, object tracks per step and executed stagnation points."""
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(7, 7))
        if task.kind is TaskKind.PATH_FOLLOWING:
            vertices = list(zip(*task.path))
            ax.plot(vertices[0], vertices[1], "--", color="gray", linewidth=1.0, label="reference")
            waypoints = discretize_path(task.path, task.waypoint_spacing)
            ax.plot(waypoints[:, 0], waypoints[:, 1], ".", color="gray", markersize=4)
        for zone in task.zones:
            ax.add_patch(
                plt.Circle(zone.center, zone.radius, fill=False, color="tab:green", linewidth=1.2)
            )
            ax.annotate(zone.name, zone.center, ha="center", va="center", fontsize=8)

        if report.steps:
            n_objects = len(report.steps[0].positions_before)
            for j in range(n_objects):
                track = [report.steps[0].positions_before[j]] + [
                    step.positions_after[j] for step in report.steps
                ]
                xs, ys = zip(*track)
                ax.plot(xs, ys, linewidth=1.0)
                ax.plot(xs[-1], ys[-1], "o", color="black", markersize=3)
            executed = [
                step.s_star for step in report.steps if step.action is StepAction.MOVE and step.s_star
            ]
            if executed:
                sx, sy = zip(*executed)
                ax.plot(sx, sy, "x", color="red", markersize=5, label="stagnation points")

        status = "completed" if report.completed else "not completed"
        ax.set_title(
            f"{report.task_name}: {status} in {report.steps_used} steps, "
            f"mean error {report.mean_error * 100:.1f} cm"
        )
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
        ax.set_aspect("equal")
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best", fontsize=8)
        return _save(fig, path)
