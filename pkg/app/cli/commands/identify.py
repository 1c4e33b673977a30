"""
Identification command: trajectories plus a field model to a sparse speed model.
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
from app.core.errors import DomainError, IdentificationError
from app.core.logging import get_logger
from app.io.files import load_trajectory_set, write_sindy_result
from app.services.sindy import ensemble_fit, preprocess, validate_dynamics

logger = get_logger(__name__)


@handle_errors
def identify(
    trajectories: Annotated[
        Path,
        typer.Option(
            "--trajectories", help="Sidecar CSV listing trajectory files and their orientations"
        ),
    ],
    config: ConfigOption = None,
    seed: SeedOption = None,
    out: OutOption = Path("out"),
    field: FieldOption = None,
    label: Annotated[
        str, typer.Option("--label", help="Object class name for the emitted dynamics block")
    ] = "tracer",
):
    """Identify the object speed dynamics with a bootstrapped robust sparse regression."""
    cfg = get_config(config, seed)
    model = get_field(cfg, field)
    records = load_trajectory_set(trajectories)
    data = preprocess(records, model, cfg.sindy)
    result = ensemble_fit(data, cfg=cfg.sindy)

    try:
        dynamics = result.to_dynamics(label)
        dynamics_label = label
    except IdentificationError as e:
        logger.warning(f"No dynamics block written: {e.message}")
        dynamics, dynamics_label = None, None

    if dynamics is not None:
        try:
            error = validate_dynamics(records, model, dynamics, cfg.sim)
            result = result.model_copy(update={"end_position_mape": error})
        except DomainError as e:
            logger.warning(f"Identified model not validated: {e.message}")

    report = write_sindy_result(result, out / "sindy_result.yaml", dynamics_label=dynamics_label)
    emit(
        {
            "report": str(report),
            "active_terms": result.active_terms,
            "xi": list(result.xi),
            "r_squared": result.r_squared,
            "end_position_mape_pct": result.end_position_mape,
        }
    )
