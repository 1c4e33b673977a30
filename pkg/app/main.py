"""
Airflow Manipulation - Command Line Entry Point.

This application handles the full learning-control pipeline:
- Fitting the analytical airflow field from gridded speed data
- Identifying object speed dynamics from recorded trajectories
- Simulating objects under a nozzle orientation
- Running closed-loop manipulation tasks with the cross-entropy planner
- Generating synthetic grids and trajectories as ground truth

Run with ``python -m app.main <command> --help``.
"""

import typer

from app.cli.commands.dynamics import simulate, synth_trajectories
from app.cli.commands.field import fit_field, synth_grid
from app.cli.commands.identify import identify
from app.cli.commands.tasks import run_task
from app.core.config import settings
from app.core.logging import get_logger

logger = get_logger(__name__)


# Initialize Typer application
app = typer.Typer(
    name=settings.APP_NAME,
    help="Airflow field modelling, dynamics identification and CEM control of objects.",
    no_args_is_help=True,
    add_completion=False,
)


def _version(value: bool) -> None:
    if value:
        typer.echo(f"{settings.APP_NAME} {settings.APP_VERSION}")
        raise typer.Exit()


@app.callback()
def main(
    version: bool = typer.Option(
        False, "--version", callback=_version, is_eager=True, help="Show the version and exit"
    ),
):
    """Airflow manipulation pipeline."""


# Include commands
app.command("fit-field")(fit_field)
app.command("identify")(identify)
app.command("simulate")(simulate)
app.command("run-task")(run_task)
app.command("synth-grid")(synth_grid)
app.command("synth-trajectories")(synth_trajectories)


def run() -> None:
    app()


if __name__ == "__main__":
    run()
