"""
Task and model accuracy metrics.
"""

from typing import Sequence

import numpy as np
from scipy.spatial.distance import pdist

from app.core.errors import DomainError
from app.models.dynamics import Trajectory
from app.models.field import Point

# Errors are perpendicular distances to the nearest polyline segment, std is the population std
ERROR_CONVENTION = "perpendicular distance to reference polyline per control step; population std"


def distance_to_polyline(points: np.ndarray, polyline: Sequence[Point]) -> np.ndarray:
    """
    Distance of each point to the nearest segment of a polyline.

    Args:
        points: Query points, shape (N, 2)
        polyline: Vertices; a single vertex is treated as a point reference

    Returns:
        Distances, shape (N,)
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    vertices = np.asarray(polyline, dtype=float).reshape(-1, 2)
    if vertices.shape[0] == 1:
        return np.linalg.norm(points - vertices[0], axis=1)

    start, end = vertices[:-1], vertices[1:]
    seg = end - start
    length_sq = np.sum(seg**2, axis=1)
    rel = points[:, None, :] - start[None, :, :]
    safe = np.where(length_sq > 0.0, length_sq, 1.0)
    u = np.clip(np.sum(rel * seg[None, :, :], axis=2) / safe, 0.0, 1.0)
    u = np.where(length_sq > 0.0, u, 0.0)
    nearest = start[None, :, :] + u[..., None] * seg[None, :, :]
    return np.min(np.linalg.norm(points[:, None, :] - nearest, axis=2), axis=1)


def path_error_metrics(errors: Sequence[Sequence[float]] | np.ndarray) -> tuple[float, float, float]:
    """
    Mean, population standard deviation and maximum of logged errors.

    Args:
        errors: Per-step error rows (one value per object), at least one step

    Raises:
        DomainError: If no errors were logged
    """
    values = np.concatenate([np.ravel(np.asarray(row, dtype=float)) for row in errors]) if len(
        errors
    ) else np.empty(0)
    if values.size == 0:
        raise DomainError("no errors logged")
    return float(values.mean()), float(values.std()), float(values.max())


def max_pairwise_distance(positions: Sequence[Point] | np.ndarray) -> float:
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    if positions.shape[0] < 2:
        raise DomainError(
            f"pairwise distance needs at least 2 positions, got {positions.shape[0]}"
        )
    return float(pdist(positions).max())


def span(diameter: float, count: int) -> float:
    """Reference extent of ``count`` objects of ``diameter`` placed in a tight row."""
    if count < 1:
        raise DomainError("span needs at least one object")
    return diameter * (count - 1)


def mape(predicted: np.ndarray, observed: np.ndarray) -> float:
    """Mean absolute percentage error in percent; 0 for empty input."""
    predicted = np.asarray(predicted, dtype=float)
    observed = np.asarray(observed, dtype=float)
    if observed.size == 0:
        return 0.0
    return float(np.mean(np.abs(predicted - observed) / np.abs(observed)) * 100.0)


def end_position_mape(predicted: Sequence[Trajectory], observed: Sequence[Trajectory]) -> float:
    """
    Percentage end-position error between paired trajectory sets.

    Each pair contributes ``||p_pred_end - p_obs_end|| / ||p_obs_end - p_obs_start||``;
    pairs whose observed object did not move are skipped.

    Raises:
        DomainError: If the sets differ in size or no observed object moved
    """
    if len(predicted) != len(observed):
        raise DomainError(
            f"trajectory sets differ in size ({len(predicted)} vs {len(observed)})"
        )
    ratios = []
    for pred, obs in zip(predicted, observed):
        travelled = float(np.linalg.norm(np.subtract(obs.end, obs.xy[0])))
        if travelled == 0.0:
            continue
        ratios.append(float(np.linalg.norm(np.subtract(pred.end, obs.end))) / travelled)
    if not ratios:
        raise DomainError("no observed trajectory moved")
    return float(np.mean(ratios) * 100.0)
