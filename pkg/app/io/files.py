"""
Readers and writers for every file the CLI consumes or produces.

- VelocityGrid: CSV ``x_m,y_m,speed_mps`` after a ``# tilt_deg=.. pan_deg=.. source=..`` line
- FieldModel: CSV ``tilt_deg,alpha_deg,b1,b2,b3`` after a ``# h=.. a1=.. a2=..`` line
- Trajectories: CSV ``object_id,t_s,x_m,y_m,speed_mps``
- Orientation sidecar: CSV ``trajectory_file,pan_deg,tilt_deg``
- TaskSpec, TaskReport summary, SindyResult: YAML
- TaskReport step log: CSV, one row per object per control step

Malformed files raise InputFileError naming the file and, where known, the line.
"""

import csv
from collections import defaultdict
from pathlib import Path
from typing import Any, Callable, Iterator, Optional, Sequence, TypeVar

import numpy as np
import yaml
from pydantic import BaseModel, ValidationError

from app.core.errors import DomainError, InputFileError
from app.core.logging import get_logger
from app.models.dynamics import Trajectory
from app.models.field import FieldGeometry, GridSource, NozzleOrientation, VelocityGrid
from app.models.sindy import SindyResult
from app.models.task import TaskReport, TaskSpec
from app.services.field_model import ALPHA_BINS_DEG, N_ALPHA_BINS, FieldModel

logger = get_logger(__name__)

GRID_COLUMNS = ["x_m", "y_m", "speed_mps"]
MODEL_COLUMNS = ["tilt_deg", "alpha_deg", "b1", "b2", "b3"]
TRAJECTORY_COLUMNS = ["object_id", "t_s", "x_m", "y_m", "speed_mps"]
SIDECAR_COLUMNS = ["trajectory_file", "pan_deg", "tilt_deg"]
STEP_LOG_COLUMNS = [
    "step",
    "action",
    "waypoint_index",
    "pan_deg",
    "tilt_deg",
    "s_star_x_m",
    "s_star_y_m",
    "cost",
    "object_index",
    "x_before_m",
    "y_before_m",
    "x_predicted_m",
    "y_predicted_m",
    "x_after_m",
    "y_after_m",
    "error_m",
    "max_pairwise_m",
    "switched_after",
]

M = TypeVar("M", bound=BaseModel)


def _open_text(path: Path) -> str:
    if not path.is_file():
        raise InputFileError(f"file not found: {path}", file=str(path))
    try:
        return path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise InputFileError(f"cannot read file: {e}", file=str(path))


def _parse_header(line: str, keys: Sequence[str], path: Path) -> dict[str, str]:
    """Parse ``# key=value key=value`` into a dict holding at least ``keys``."""
    if not line.startswith("#"):
        raise InputFileError(
            f"expected a '# {' '.join(f'{k}=<v>' for k in keys)}' header line", file=str(path), line=1
        )
    values: dict[str, str] = {}
    for token in line[1:].split():
        key, sep, value = token.partition("=")
        if not sep:
            raise InputFileError(f"malformed header token '{token}'", file=str(path), line=1)
        values[key] = value
    missing = [key for key in keys if key not in values]
    if missing:
        raise InputFileError(f"header is missing {missing}", file=str(path), line=1)
    return values


def _header_float(values: dict[str, str], key: str, path: Path) -> float:
    try:
        return float(values[key])
    except ValueError:
        raise InputFileError(
            f"header value {key}={values[key]!r} is not a number", file=str(path), line=1
        ) from None


def _rows(
    text: str, columns: Sequence[str], path: Path, skip_lines: int = 0
) -> Iterator[tuple[int, dict[str, str]]]:
    """Yield (line number, row) pairs after checking the column header."""
    lines = text.splitlines()[skip_lines:]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or [name.strip() for name in reader.fieldnames] != list(columns):
        raise InputFileError(
            f"expected columns {','.join(columns)}, got {reader.fieldnames}",
            file=str(path),
            line=skip_lines + 1,
        )
    for row in reader:
        line = skip_lines + reader.line_num
        if None in row or any(value is None for value in row.values()):
            raise InputFileError(
                f"expected {len(columns)} fields per row", file=str(path), line=line
            )
        yield line, {key.strip(): value.strip() for key, value in row.items()}


def _number(row: dict[str, str], key: str, path: Path, line: int, cast: Callable = float):
    try:
        value = cast(row[key])
    except ValueError:
        raise InputFileError(f"{key} value {row[key]!r} is not a number", file=str(path), line=line) from None
    if isinstance(value, float) and not np.isfinite(value):
        raise InputFileError(f"{key} value {row[key]!r} is not finite", file=str(path), line=line)
    return value


def _prepare(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


# Velocity grids


def write_grid(grid: VelocityGrid, path: Path) -> Path:
    with _prepare(path).open("w", newline="", encoding="utf-8") as f:
        f.write(f"# tilt_deg={grid.tilt_deg!r} pan_deg={grid.pan_deg!r} source={grid.source.value}\n")
        writer = csv.writer(f)
        writer.writerow(GRID_COLUMNS)
        writer.writerows([x, y, speed] for x, y, speed in grid.points)
    return path


def read_grid(path: Path) -> VelocityGrid:
    text = _open_text(path)
    header = _parse_header(text.splitlines()[0] if text else "", ["tilt_deg", "source"], path)
    try:
        source = GridSource(header["source"])
    except ValueError:
        raise InputFileError(
            f"unknown grid source {header['source']!r}", file=str(path), line=1
        ) from None

    points = []
    seen: dict[tuple[float, float], int] = {}
    for line, row in _rows(text, GRID_COLUMNS, path, skip_lines=1):
        x, y, speed = (_number(row, key, path, line) for key in GRID_COLUMNS)
        if speed < 0.0:
            raise InputFileError(f"speed must be >= 0, got {speed}", file=str(path), line=line)
        if (x, y) in seen:
            raise InputFileError(
                f"duplicate grid location ({x}, {y}), first seen on line {seen[(x, y)]}",
                file=str(path),
                line=line,
            )
        seen[(x, y)] = line
        points.append((x, y, speed))
    if not points:
        raise InputFileError("grid has no data rows", file=str(path))

    try:
        return VelocityGrid(
            tilt_deg=_header_float(header, "tilt_deg", path),
            pan_deg=_header_float(header, "pan_deg", path) if "pan_deg" in header else 90.0,
            source=source,
            points=points,
        )
    except ValidationError as e:
        raise InputFileError(f"invalid grid header: {e.errors()[0]['msg']}", file=str(path), line=1)


# Field models


def write_field_model(model: FieldModel, path: Path) -> Path:
    g = model.geometry
    with _prepare(path).open("w", newline="", encoding="utf-8") as f:
        f.write(f"# h={g.h!r} a1={g.a1!r} a2={g.a2!r}\n")
        writer = csv.writer(f)
        writer.writerow(MODEL_COLUMNS)
        for tilt, table in zip(model.tilt_nodes, model.table):
            for alpha, (b1, b2, b3) in zip(ALPHA_BINS_DEG, table):
                writer.writerow([float(tilt), int(alpha), float(b1), float(b2), float(b3)])
    return path


def read_field_model(path: Path) -> FieldModel:
    """Load a coefficient table; every tilt node must list all 360 alpha bins."""
    text = _open_text(path)
    header = _parse_header(text.splitlines()[0] if text else "", ["h", "a1", "a2"], path)
    try:
        geometry = FieldGeometry(**{key: _header_float(header, key, path) for key in ("h", "a1", "a2")})
    except ValidationError as e:
        raise InputFileError(f"invalid geometry header: {e.errors()[0]['msg']}", file=str(path), line=1)

    tables: dict[float, dict[int, tuple[float, float, float]]] = defaultdict(dict)
    for line, row in _rows(text, MODEL_COLUMNS, path, skip_lines=1):
        tilt = _number(row, "tilt_deg", path, line)
        alpha = _number(row, "alpha_deg", path, line, cast=int)
        b1, b2, b3 = (_number(row, key, path, line) for key in ("b1", "b2", "b3"))
        if not -180 <= alpha <= 179:
            raise InputFileError(f"alpha_deg {alpha} outside -180 .. 179", file=str(path), line=line)
        if not (b1 > 0.0 and b3 < b2 < 0.0):
            raise InputFileError(
                f"profile ({b1}, {b2}, {b3}) must satisfy b1 > 0 and b3 < b2 < 0",
                file=str(path),
                line=line,
            )
        if alpha in tables[tilt]:
            raise InputFileError(
                f"duplicate row for tilt {tilt} deg, alpha {alpha} deg", file=str(path), line=line
            )
        tables[tilt][alpha] = (b1, b2, b3)

    if not tables:
        raise InputFileError("field model has no data rows", file=str(path))
    nodes = sorted(tables)
    for tilt in nodes:
        if len(tables[tilt]) != N_ALPHA_BINS:
            raise InputFileError(
                f"tilt {tilt} deg lists {len(tables[tilt])} alpha bins, expected {N_ALPHA_BINS}",
                file=str(path),
            )
    table = np.array([[tables[tilt][int(alpha)] for alpha in ALPHA_BINS_DEG] for tilt in nodes])
    try:
        model = FieldModel(geometry, nodes, table)
    except DomainError as e:
        raise InputFileError(e.message, file=str(path))
    logger.info(f"Loaded field model with tilt nodes {nodes} from {path}")
    return model


# Trajectories


def write_trajectories(trajectories: Sequence[Trajectory], path: Path) -> Path:
    with _prepare(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(TRAJECTORY_COLUMNS)
        for trajectory in trajectories:
            writer.writerows(
                [trajectory.object_id, t, x, y, speed]
                for t, x, y, speed in zip(trajectory.t, trajectory.x, trajectory.y, trajectory.speed)
            )
    return path


def read_trajectories(path: Path) -> list[Trajectory]:
    """Trajectories grouped by object id, in order of first appearance."""
    text = _open_text(path)
    columns: dict[int, dict[str, list[float]]] = {}
    last_t: dict[int, float] = {}
    for line, row in _rows(text, TRAJECTORY_COLUMNS, path):
        object_id = _number(row, "object_id", path, line, cast=int)
        t = _number(row, "t_s", path, line)
        if object_id in last_t and t <= last_t[object_id]:
            raise InputFileError(
                f"time of object {object_id} does not increase ({t} after {last_t[object_id]})",
                file=str(path),
                line=line,
            )
        speed = _number(row, "speed_mps", path, line)
        if speed < 0.0:
            raise InputFileError(f"speed must be >= 0, got {speed}", file=str(path), line=line)
        last_t[object_id] = t
        record = columns.setdefault(object_id, {"t": [], "x": [], "y": [], "speed": []})
        record["t"].append(t)
        record["x"].append(_number(row, "x_m", path, line))
        record["y"].append(_number(row, "y_m", path, line))
        record["speed"].append(speed)
    if not columns:
        raise InputFileError("trajectory file has no data rows", file=str(path))
    return [Trajectory(object_id=object_id, **record) for object_id, record in columns.items()]


def write_orientation_sidecar(entries: Sequence[tuple[str, NozzleOrientation]], path: Path) -> Path:
    with _prepare(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(SIDECAR_COLUMNS)
        writer.writerows([name, o.pan_deg, o.tilt_deg] for name, o in entries)
    return path


def read_orientation_sidecar(path: Path) -> list[tuple[Path, NozzleOrientation]]:
    """Trajectory files (resolved next to the sidecar) and their nozzle orientations."""
    text = _open_text(path)
    entries = []
    for line, row in _rows(text, SIDECAR_COLUMNS, path):
        pan = _number(row, "pan_deg", path, line)
        tilt = _number(row, "tilt_deg", path, line)
        try:
            orientation = NozzleOrientation(pan_deg=pan, tilt_deg=tilt)
        except ValidationError as e:
            raise InputFileError(
                f"invalid orientation: {e.errors()[0]['msg']}", file=str(path), line=line
            )
        target = Path(row["trajectory_file"])
        entries.append((target if target.is_absolute() else path.parent / target, orientation))
    if not entries:
        raise InputFileError("orientation sidecar has no data rows", file=str(path))
    return entries


def load_trajectory_set(sidecar: Path) -> list[tuple[Trajectory, NozzleOrientation]]:
    """Every trajectory listed in a sidecar, paired with its orientation."""
    pairs = []
    for trajectory_file, orientation in read_orientation_sidecar(sidecar):
        pairs.extend((trajectory, orientation) for trajectory in read_trajectories(trajectory_file))
    logger.info(f"Loaded {len(pairs)} trajectories listed in {sidecar}")
    return pairs


# YAML documents


def _dump_yaml(data: Any, path: Path) -> Path:
    with _prepare(path).open("w", encoding="utf-8") as f:
        yaml.safe_dump(data, f, sort_keys=False)
    return path


def _load_yaml(path: Path, model: type[M], ignore: Sequence[str] = ()) -> M:
    text = _open_text(path)
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise InputFileError(
            f"not valid YAML: {e}", file=str(path), line=mark.line + 1 if mark else None
        )
    if not isinstance(data, dict):
        raise InputFileError("expected a mapping at the top level", file=str(path))
    for key in ignore:
        data.pop(key, None)
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise InputFileError(f"invalid value at '{location}': {first['msg']}", file=str(path))


def write_task(task: TaskSpec, path: Path) -> Path:
    return _dump_yaml(task.model_dump(mode="json"), path)


def read_task(path: Path) -> TaskSpec:
    return _load_yaml(path, TaskSpec)


def write_sindy_result(result: SindyResult, path: Path, dynamics_label: Optional[str] = None) -> Path:
    """
    Write an identification report.

    When ``dynamics_label`` is given and the active terms fit the linear speed
    model, a ``dynamics`` block ready for a run config is appended.
    """
    data = result.model_dump(mode="json")
    if dynamics_label is not None:
        model = result.to_dynamics(dynamics_label)
        data["dynamics"] = {dynamics_label: model.model_dump(mode="json")}
    return _dump_yaml(data, path)


def read_sindy_result(path: Path) -> SindyResult:
    return _load_yaml(path, SindyResult, ignore=("dynamics",))


def write_report_summary(report: TaskReport, path: Path) -> Path:
    """Report without the step log; the steps go to the CSV step log."""
    return _dump_yaml(report.model_dump(mode="json", exclude={"steps"}), path)


def write_step_log(report: TaskReport, path: Path) -> Path:
    with _prepare(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=STEP_LOG_COLUMNS)
        writer.writeheader()
        for record in report.steps:
            for j, (before, predicted, after, error) in enumerate(
                zip(
                    record.positions_before,
                    record.predicted_positions,
                    record.positions_after,
                    record.errors,
                )
            ):
                writer.writerow(
                    {
                        "step": record.step,
                        "action": record.action.value,
                        "waypoint_index": record.waypoint_index,
                        "pan_deg": record.pan_deg if record.pan_deg is not None else "",
                        "tilt_deg": record.tilt_deg if record.tilt_deg is not None else "",
                        "s_star_x_m": record.s_star[0] if record.s_star else "",
                        "s_star_y_m": record.s_star[1] if record.s_star else "",
                        "cost": record.cost if record.cost is not None else "",
                        "object_index": j,
                        "x_before_m": before[0],
                        "y_before_m": before[1],
                        "x_predicted_m": predicted[0],
                        "y_predicted_m": predicted[1],
                        "x_after_m": after[0],
                        "y_after_m": after[1],
                        "error_m": error,
                        "max_pairwise_m": record.max_pairwise_distance
                        if record.max_pairwise_distance is not None
                        else "",
                        "switched_after": int(record.switched_after),
                    }
                )
    return path
