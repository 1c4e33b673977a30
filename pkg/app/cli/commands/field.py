"""
Field commands.

- synth-grid: write synthetic velocity grids, one per tilt
- fit-field: fit (and optionally fuse) grids into a field model file
"""

import csv
from pathlib import Path
from typing import Annotated, Optional

import numpy as np
import typer

from app.cli.dependencies import ConfigOption, OutOption, SeedOption, emit, get_config, handle_errors
from app.core.logging import get_logger
from app.io.files import read_grid, write_field_model, write_grid
from app.models.field import ProfileFit
from app.services.field_fit import build_field_model, fuse_grids, grid_stagnation
from app.services.synthetic import generate_synthetic_grid

logger = get_logger(__name__)

DIAGNOSTIC_COLUMNS = [
    "tilt_deg",
    "alpha_deg",
    "b1",
    "b2",
    "b3",
    "n_samples",
    "half_width_deg",
    "rms_residual",
    "mape_pct",
]


def _grid_name(tilt: float) -> str:
    return f"grid_tilt_{tilt:g}.csv"


@handle_errors
def synth_grid(
    config: ConfigOption = None,
    seed: SeedOption = None,
    out: OutOption = Path("out"),
    tilt: Annotated[
        Optional[list[float]],
        typer.Option("--tilt", help="Tilt in degrees (repeatable); defaults to the config's tilt nodes"),
    ] = None,
    noise: Annotated[
        Optional[float], typer.Option("--noise", min=0.0, help="Relative speed noise")
    ] = None,
):
    """Sample the synthetic ground-truth field on square grids centered on s."""
    cfg = get_config(config, seed)
    tilts = tilt or cfg.field.tilt_nodes
    update = {} if noise is None else {"noise": noise}
    written = []
    for k, value in enumerate(tilts):
        spec = cfg.synthetic.model_copy(update={**update, "tilt_deg": value, "stagnation": None})
        grid = generate_synthetic_grid(spec, cfg.geometry, seed=cfg.synthetic.seed + k)
        written.append(str(write_grid(grid, out / _grid_name(value))))
    emit({"grids": written})


def _write_diagnostics(diagnostics: dict[float, list[ProfileFit]], path: Path) -> Path:
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(DIAGNOSTIC_COLUMNS)
        for tilt, fits in diagnostics.items():
            for fit in fits:
                p = fit.profile
                writer.writerow(
                    [tilt, fit.alpha_deg, p.b1, p.b2, p.b3]
                    + [fit.n_samples, fit.half_width_deg, fit.rms_residual, fit.mape]
                )
    return path


@handle_errors
def fit_field(
    grid: Annotated[list[Path], typer.Option("--grid", help="Measured or synthetic grid CSV (repeatable)")],
    config: ConfigOption = None,
    seed: SeedOption = None,
    out: OutOption = Path("out"),
    cfd: Annotated[
        Optional[list[Path]],
        typer.Option("--cfd", help="CFD grid CSV fused into the grid with the same tilt (repeatable)"),
    ] = None,
):
    """Fit radial profiles per alpha bin and tilt node and write the field model."""
    cfg = get_config(config, seed)
    grids = [read_grid(path) for path in grid]

    if cfd:
        by_tilt = {g.tilt_deg: g for g in (read_grid(path) for path in cfd)}
        fused = []
        for meas in grids:
            partner = by_tilt.get(meas.tilt_deg)
            if partner is None:
                logger.warning(f"No CFD grid at tilt {meas.tilt_deg} deg; using measurements only")
                fused.append(meas)
                continue
            s = grid_stagnation(meas, cfg.geometry)
            fused.append(fuse_grids(meas, partner, s, cfg.field.fusion_r0))
        grids = fused

    model, diagnostics = build_field_model(grids, cfg.geometry, cfg.field.fit)
    out.mkdir(parents=True, exist_ok=True)
    model_path = write_field_model(model, out / "field_model.csv")
    diagnostics_path = _write_diagnostics(diagnostics, out / "fit_diagnostics.csv")
    emit(
        {
            "field_model": str(model_path),
            "diagnostics": str(diagnostics_path),
            "tilt_nodes": [float(t) for t in model.tilt_nodes],
            "median_mape_pct": {
                str(tilt): float(np.median([fit.mape for fit in fits]))
                for tilt, fits in diagnostics.items()
            },
        }
    )
