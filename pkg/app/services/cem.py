"""
Cross-entropy stagnation point planning.

Each control step looks for the stagnation point ``s`` that brings the objects
closest to their references after ``delta_T`` seconds of noise-free
simulation. Candidates closer than ``delta_min`` to any object, or that no
nozzle orientation can produce, cost ``J_p``.

Sampling happens in centimetres: along a line away from the reference
(univariate) or over the plane (bivariate).
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from app.core.errors import DomainError
from app.core.logging import get_logger
from app.models.cem import CemConfig, CemOutcome, SamplingMode, SamplingSpace
from app.models.dynamics import ObjectState, SimConfig
from app.models.field import NozzleOrientation, Point
from app.services.dynamics import coefficient_matrix, propagate
from app.services.field_model import AirflowField
from app.services.geometry import orientation_for_stagnation

logger = get_logger(__name__)

CM_PER_M = 100.0

CostFunction = Callable[[np.ndarray], np.ndarray]


class PlanningCost:
    """
    Penalized end-position cost of candidate stagnation points.

    Args:
        objects: Object states at plan time
        refs: One reference point per object
        field: Airflow field used for prediction
        cfg: Penalty, safety distance and horizon
        sim: Integrator settings; noise and delay are ignored for planning
    """

    def __init__(
        self,
        objects: Sequence[ObjectState],
        refs: Sequence[Point],
        field: AirflowField,
        cfg: CemConfig,
        sim: Optional[SimConfig] = None,
    ):
        if len(refs) != len(objects):
            raise ValueError(f"{len(objects)} objects but {len(refs)} references")
        self.positions = np.array([obj.position for obj in objects], dtype=float).reshape(-1, 2)
        self.speeds = np.array([obj.speed for obj in objects], dtype=float)
        self.xi = coefficient_matrix(objects)
        self.refs = np.asarray(refs, dtype=float).reshape(-1, 2)
        self.field = field
        self.cfg = cfg
        self.sim = (sim or SimConfig()).model_copy(update={"noise_sigma": 0.0, "delay_s": 0.0})
        nodes = getattr(field, "tilt_nodes", None)
        self._max_tilt = float(nodes[-1]) if nodes is not None else None

    def orientation(self, s: Point) -> Optional[NozzleOrientation]:
        """Orientation producing ``s``, or None if unreachable or outside tilt coverage."""
        try:
            orientation = orientation_for_stagnation(s, self.field.geometry)
        except DomainError:
            return None
        if self._max_tilt is not None and orientation.tilt_deg > self._max_tilt + 1e-9:
            return None
        return orientation

    def evaluate(
        self, points: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, list[Optional[NozzleOrientation]]]:
        """
        Costs, predicted end positions and orientations for candidates.

        Args:
            points: Candidate stagnation points, shape (N, 2)

        Returns:
            Costs (N,), end positions (N, M, 2) (initial positions where
            infeasible) and orientations (None where infeasible)
        """
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        n = points.shape[0]
        costs = np.full(n, self.cfg.J_p)
        ends = np.broadcast_to(self.positions, (n, *self.positions.shape)).copy()

        distances = np.linalg.norm(self.positions[None, :, :] - points[:, None, :], axis=-1)
        clear = np.all(distances >= self.cfg.delta_min, axis=1)
        orientations: list[Optional[NozzleOrientation]] = [
            self.orientation((float(x), float(y))) if ok else None
            for (x, y), ok in zip(points, clear)
        ]
        feasible = np.array([o is not None for o in orientations], dtype=bool)
        if not feasible.any():
            return costs, ends, orientations

        chosen = [o for o in orientations if o is not None]
        oriented = self.field.orient(
            np.array([o.pan_deg for o in chosen]), np.array([o.tilt_deg for o in chosen])
        )
        batch = len(chosen)
        result = propagate(
            oriented,
            np.broadcast_to(self.positions, (batch, *self.positions.shape)).copy(),
            np.broadcast_to(self.speeds, (batch, self.speeds.size)).copy(),
            self.xi,
            self.cfg.delta_T,
            self.sim,
        )
        end = result.end_positions
        ends[feasible] = end
        costs[feasible] = np.linalg.norm(end - self.refs[None, :, :], axis=-1).sum(axis=1)
        return costs, ends, orientations

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.evaluate(points)[0]

    def clearance(self, points: np.ndarray) -> np.ndarray:
        """Distance from each candidate to its nearest object, capped at ``delta_min``."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        distances = np.linalg.norm(self.positions[None, :, :] - points[:, None, :], axis=-1)
        return np.minimum(distances.min(axis=1), self.cfg.delta_min)


def cost(
    s: Point,
    objects: Sequence[ObjectState],
    refs: Sequence[Point],
    field: AirflowField,
    cfg: CemConfig,
    sim: Optional[SimConfig] = None,
) -> float:
    """Penalized cost of one stagnation point."""
    return float(PlanningCost(objects, refs, field, cfg, sim)(np.array([s]))[0])


@dataclass(frozen=True)
class SearchResult:
    """Final Gaussian and the best sample seen by a cross-entropy search."""

    mean: np.ndarray
    mean_cost: float
    best_point: np.ndarray
    best_cost: float
    iterations: int
    converged: bool
    spread_history: list[float]


def _to_points(samples: np.ndarray, space: SamplingSpace) -> np.ndarray:
    """Map samples in cm to stagnation points in m."""
    if space.mode is SamplingMode.LINE:
        anchor = np.asarray(space.anchor, dtype=float)
        direction = np.asarray(space.away_dir, dtype=float)
        return anchor[None, :] + (samples[:, :1] / CM_PER_M) * direction[None, :]
    return samples / CM_PER_M


def initial_mean(space: SamplingSpace, cfg: CemConfig, default: Optional[Point] = None) -> np.ndarray:
    """Initial mean in cm; a planar search without ``mu0`` starts at ``default`` (m)."""
    if space.mode is SamplingMode.LINE:
        if not isinstance(cfg.mu0, (int, float)):
            raise ValueError("line sampling needs a scalar mu0")
        return np.array([float(cfg.mu0)])
    if isinstance(cfg.mu0, list):
        return np.asarray(cfg.mu0, dtype=float)
    if default is None:
        raise ValueError("planar sampling needs mu0 or a default mean")
    return np.asarray(default, dtype=float) * CM_PER_M


def cross_entropy_search(
    space: SamplingSpace,
    cost_fn: CostFunction,
    cfg: CemConfig,
    rng: np.random.Generator,
    mu0: Optional[np.ndarray] = None,
    tie_break: Optional[CostFunction] = None,
) -> SearchResult:
    """
    Minimize ``cost_fn`` over the sampling space with the cross-entropy method.

    Every iteration draws ``n`` samples, keeps the ``n_elite`` cheapest (stable
    order, equal costs ranked by ``tie_break`` when given), and refits the mean
    and population (co)variance, plus the variance floor. The search stops
    once the variance (line) or the covariance Frobenius norm (plane) is at
    most ``sigma_star``, or after ``i_max`` iterations.

    Args:
        space: Line or plane sampling
        cost_fn: Maps (N, 2) points in m to (N,) costs
        cfg: Distribution parameters
        rng: Sampling generator
        mu0: Initial mean in cm; defaults to ``cfg.mu0``
        tie_break: Secondary key for samples of equal cost
    """
    mean = np.asarray(mu0, dtype=float) if mu0 is not None else initial_mean(space, cfg)
    cov = cfg.sigma0_for(space.mode)
    dim = mean.size
    floor = cfg.variance_floor * np.eye(dim)

    best_point = _to_points(mean[None, :], space)[0]
    best_cost = np.inf
    history: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, cfg.i_max + 1):
        samples = rng.multivariate_normal(mean, cov, size=cfg.n, check_valid="ignore")
        points = _to_points(samples, space)
        costs = np.asarray(cost_fn(points), dtype=float)
        if tie_break is None:
            order = np.argsort(costs, kind="stable")
        else:
            order = np.lexsort((np.asarray(tie_break(points), dtype=float), costs))
        if costs[order[0]] < best_cost:
            best_cost = float(costs[order[0]])
            best_point = points[order[0]]

        elite = samples[order[: cfg.n_elite]]
        mean = elite.mean(axis=0)
        cov = np.cov(elite, rowvar=False, bias=True).reshape(dim, dim) + floor
        spread = float(cov[0, 0]) if space.mode is SamplingMode.LINE else float(
            np.linalg.norm(cov, "fro")
        )
        history.append(spread)
        if spread <= cfg.sigma_star:
            converged = True
            break

    mean_point = _to_points(mean[None, :], space)[0]
    mean_cost = float(np.asarray(cost_fn(mean_point[None, :]), dtype=float)[0])
    return SearchResult(
        mean=mean_point,
        mean_cost=mean_cost,
        best_point=best_point,
        best_cost=best_cost,
        iterations=iterations,
        converged=converged,
        spread_history=history,
    )


def optimize(
    space: SamplingSpace,
    objects: Sequence[ObjectState],
    refs: Sequence[Point],
    field: AirflowField,
    cfg: CemConfig,
    sim: Optional[SimConfig] = None,
    rng: Optional[np.random.Generator] = None,
) -> CemOutcome:
    """
    Plan one control step.

    The optimal stagnation point is the mean of the final Gaussian. If that
    mean is infeasible the best evaluated sample is returned instead, so a
    feasible outcome always respects ``delta_min``.

    Returns:
        CemOutcome with the stagnation point, the orientation producing it
        (None when infeasible) and the predicted end positions
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    planning = PlanningCost(objects, refs, field, cfg, sim)
    default_mean = tuple(planning.positions.mean(axis=0))
    mu0 = initial_mean(space, cfg, default_mean)
    # Among penalized candidates prefer those violating delta_min the least
    result = cross_entropy_search(
        space, planning, cfg, rng, mu0=mu0, tie_break=lambda points: -planning.clearance(points)
    )

    s_star = result.mean
    if result.mean_cost >= cfg.J_p and result.best_cost < result.mean_cost:
        logger.warning("Final CEM mean is infeasible; using the best evaluated sample")
        s_star = result.best_point

    costs, ends, orientations = planning.evaluate(s_star[None, :])
    feasible = orientations[0] is not None
    if not feasible:
        logger.warning(f"No feasible stagnation point found after {result.iterations} iteration(s)")
    return CemOutcome(
        s_star=(float(s_star[0]), float(s_star[1])),
        orientation=orientations[0],
        best_cost=float(costs[0]),
        iterations_used=result.iterations,
        converged=result.converged and feasible,
        feasible=feasible,
        predicted_positions=[(float(x), float(y)) for x, y in ends[0]],
        variance_history=result.spread_history,
    )
