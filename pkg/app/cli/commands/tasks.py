"""
Task command: closed-loop execution of a task file or a built-in preset.
"""

from pathlib import Path
from typing import Annotated

import typer

from app.cli.dependencies import (
    ConfigOption,
    FieldOption,
    OutOption,
    SeedOption,
    emit,
    get_config,
    get_field,
    handle_errors,
)
from app.io.files import read_task, write_report_summary, write_step_log
from app.io.plots import plot_task_report
from app.models.task import TaskSpec
from app.services.presets import preset
from app.services.tasks import run_task as run_closed_loop

PRESET_PREFIX = "preset:"


def load_task(reference: str) -> TaskSpec:
    if reference.startswith(PRESET_PREFIX):
        return preset(reference[len(PRESET_PREFIX) :])
    return read_task(Path(reference))


@handle_errors
def run_task(
    task: Annotated[
        str, typer.Option("--task", help="Task YAML file, or preset:<name> for a built-in task")
    ],
    config: ConfigOption = None,
    seed: SeedOption = None,
    out: OutOption = Path("out"),
    field: FieldOption = None,
    svg: Annotated[bool, typer.Option("--svg", help="Also write an SVG overlay")] = False,
):
    """Run a manipulation task in closed loop and write the report and step log."""
    cfg = get_config(config, seed)
    spec = load_task(task)
    model = get_field(cfg, field)
    report = run_closed_loop(
        spec,
        model,
        cfg.dynamics,
        cfg.cem.line,
        cfg.cem.plane,
        cfg.sim,
        workspace=cfg.workspace,
        seed=cfg.seed,
    )

    summary = {
        "report": str(write_report_summary(report, out / "report.yaml")),
        "steps": str(write_step_log(report, out / "steps.csv")),
    }
    if svg:
        summary["svg"] = str(plot_task_report(spec, report, out / "report.svg"))
    summary.update(
        {
            "completed": report.completed,
            "steps_used": report.steps_used,
            "mean_error": report.mean_error,
            "max_error": report.max_error,
        }
    )
    emit(summary)
