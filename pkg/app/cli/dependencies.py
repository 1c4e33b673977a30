"""
Shared CLI plumbing: option types, config and field loading, error rendering.

Every command is wrapped by ``handle_errors``: a domain error is logged and
printed to stderr as one JSON line ``{"error": <code>, "message": ..., ...}``
with exit code 1; anything unexpected exits with code 2 and
``internal_error``.
"""

import functools
import json
import sys
from pathlib import Path
from typing import Annotated, Any, Callable, Optional

import typer

from app.core.config import RunConfig, load_run_config
from app.core.errors import AirflowError
from app.core.logging import get_logger
from app.io.files import read_field_model
from app.services import synthetic
from app.services.field_model import FieldModel

logger = get_logger(__name__)

# Option types shared by all commands
ConfigOption = Annotated[
    Optional[Path],
    typer.Option("--config", "-c", help="Run configuration (YAML); built-in defaults if omitted"),
]
SeedOption = Annotated[
    Optional[int],
    typer.Option("--seed", min=0, help="Master seed overriding every seed in the config"),
]
OutOption = Annotated[Path, typer.Option("--out", "-o", help="Output directory")]
FieldOption = Annotated[
    Optional[Path],
    typer.Option(
        "--field",
        help="Field model CSV; defaults to the config's table_file, then the synthetic field",
    ),
]


def render_error(payload: dict[str, Any]) -> None:
    sys.stderr.write(json.dumps(payload, default=str) + "\n")


def handle_errors(command: Callable) -> Callable:
    """Turn exceptions raised by a command into one JSON error line and an exit code."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (typer.Exit, typer.Abort):
            raise
        except AirflowError as e:
            logger.error(f"{e.code}: {e.message}")
            render_error(e.to_dict())
            raise typer.Exit(code=1)
        except Exception as e:
            logger.error(f"Unexpected error: {e!r}")
            render_error({"error": "internal_error", "message": str(e)})
            raise typer.Exit(code=2)

    return wrapper


def get_config(path: Optional[Path], seed: Optional[int]) -> RunConfig:
    config = load_run_config(path, seed=seed)
    logger.info(f"Loaded configuration{f' from {path}' if path else ' (defaults)'}, seed {config.seed}")
    return config


def get_field(config: RunConfig, path: Optional[Path]) -> FieldModel:
    """Field model from an explicit file, the configured file, or the synthetic field."""
    source = path or config.field.table_file
    if source is not None:
        return read_field_model(source)
    logger.info(f"Using the synthetic field at tilt nodes {config.field.tilt_nodes}")
    return synthetic.build_field_model(config.synthetic, config.geometry, config.field.tilt_nodes)


def emit(summary: dict[str, Any]) -> None:
    """Print a command summary as one JSON line on stdout."""
    typer.echo(json.dumps(summary, default=str))
