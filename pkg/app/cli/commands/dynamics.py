"""
Object dynamics commands.

- simulate: integrate objects under one nozzle orientation
- synth-trajectories: record synthetic release experiments for identification
"""

from pathlib import Path
from typing import Annotated, Optional

import numpy as np
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
from app.core.errors import DomainError
from app.io.files import write_orientation_sidecar, write_trajectories
from app.io.plots import plot_trajectories
from app.models.dynamics import ObjectState
from app.models.field import NozzleOrientation
from app.services.dynamics import simulate as simulate_objects
from app.services.geometry import stagnation_points
from app.services.synthetic import generate_synthetic_trajectories

PanOption = Annotated[float, typer.Option("--pan", min=-180.0, max=180.0, help="Pan angle in degrees")]
ClassOption = Annotated[str, typer.Option("--object-class", help="Object class from the dynamics block")]


def _parse_position(text: str) -> tuple[float, float]:
    try:
        x, y = (float(part) for part in text.split(","))
    except ValueError:
        raise DomainError(f"position must be 'x,y' in metres, got {text!r}", position=text) from None
    return (x, y)


@handle_errors
def simulate(
    position: Annotated[
        list[str], typer.Option("--position", "-p", help="Initial position 'x,y' in m (repeatable)")
    ],
    tilt: Annotated[float, typer.Option("--tilt", min=0.0, max=89.999, help="Tilt angle in degrees")],
    config: ConfigOption = None,
    seed: SeedOption = None,
    out: OutOption = Path("out"),
    field: FieldOption = None,
    pan: PanOption = 90.0,
    object_class: ClassOption = "tracer",
    duration: Annotated[float, typer.Option("--duration", min=0.0, help="Seconds")] = 2.0,
    svg: Annotated[bool, typer.Option("--svg", help="Also write an SVG plot")] = False,
):
    """Simulate objects released at rest under one nozzle orientation."""
    cfg = get_config(config, seed)
    model = get_field(cfg, field)
    dynamics = cfg.dynamics_for(object_class)
    orientation = NozzleOrientation(pan_deg=pan, tilt_deg=tilt)
    objects = [
        ObjectState(object_id=j, position=_parse_position(text), dynamics=dynamics)
        for j, text in enumerate(position)
    ]
    trajectories = simulate_objects(objects, model, orientation, duration, cfg.sim)

    summary = {"trajectories": str(write_trajectories(trajectories, out / "trajectories.csv"))}
    if svg:
        s = stagnation_points(np.array([pan]), np.array([tilt]), model.geometry)[0]
        summary["svg"] = str(plot_trajectories(trajectories, out / "trajectories.svg", (s[0], s[1])))
    summary["end_positions"] = [trajectory.end for trajectory in trajectories]
    emit(summary)


@handle_errors
def synth_trajectories(
    config: ConfigOption = None,
    seed: SeedOption = None,
    out: OutOption = Path("out"),
    field: FieldOption = None,
    count: Annotated[int, typer.Option("--count", min=1, help="Trajectories per tilt")] = 50,
    tilt: Annotated[
        Optional[list[float]], typer.Option("--tilt", help="Tilt in degrees (repeatable)")
    ] = None,
    pan: PanOption = 90.0,
    object_class: ClassOption = "tracer",
    duration: Annotated[float, typer.Option("--duration", min=0.0, help="Seconds")] = 2.0,
):
    """Release objects in the 0.20 .. 0.58 m annulus around s and record them at 40 Hz."""
    cfg = get_config(config, seed)
    model = get_field(cfg, field)
    orientations = [NozzleOrientation(pan_deg=pan, tilt_deg=t) for t in (tilt or [0.0, 22.5])]
    records = generate_synthetic_trajectories(
        cfg.dynamics_for(object_class),
        model,
        orientations,
        count,
        cfg.sim,
        seed=cfg.seed,
        duration=duration,
    )

    entries = []
    for trajectory, orientation in records:
        name = f"trajectory_{trajectory.object_id:04d}.csv"
        write_trajectories([trajectory], out / name)
        entries.append((name, orientation))
    sidecar = write_orientation_sidecar(entries, out / "orientations.csv")
    emit({"sidecar": str(sidecar), "trajectories": len(entries)})
