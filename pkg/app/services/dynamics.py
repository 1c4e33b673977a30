"""
Object motion under the identified speed ODE.

Each object carries a scalar speed ``v`` that evolves as
``dv/dt = xi1 * v + xi2 * v_air + xi3`` and moves radially away from the
stagnation point with that speed. The speed never goes negative: its
derivative is clipped at zero speed and every reported speed is clamped.

All objects (and, for planning, all candidate orientations) are integrated as
one vectorized system with an adaptive Runge-Kutta method.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from app.core.errors import DomainError, SolverError
from app.core.logging import get_logger
from app.models.dynamics import DynamicsModel, ObjectState, SimConfig, Trajectory
from app.models.field import NozzleOrientation, Point
from app.services.field_model import AirflowField, OrientedAirflow, StillAir

logger = get_logger(__name__)

# Output grid times closer than this are treated as equal
_TIME_TOL = 1e-12


def speed_derivative(model: DynamicsModel, v_obj: float, v_air: float) -> float:
    return model.xi1 * v_obj + model.xi2 * v_air + model.xi3


def velocity_2d(state: ObjectState, s: Point) -> np.ndarray:
    """Planar velocity of an object: its speed along the direction away from ``s``."""
    dx, dy = state.position[0] - s[0], state.position[1] - s[1]
    r = math.hypot(dx, dy)
    speed = max(state.speed, 0.0)
    if r == 0.0 or speed == 0.0:
        return np.zeros(2)
    return np.array([speed * dx / r, speed * dy / r])


@dataclass(frozen=True)
class Propagation:
    """
    Sampled states of a batch of objects.

    Attributes:
        t: Sample times, shape (T,)
        positions: Positions, shape (T, B, M, 2)
        speeds: Clamped speeds, shape (T, B, M)
    """

    t: np.ndarray
    positions: np.ndarray
    speeds: np.ndarray

    @property
    def end_positions(self) -> np.ndarray:
        return self.positions[-1]


def output_times(duration: float, rate_hz: float) -> np.ndarray:
    """Fixed-rate sample times from 0 to ``duration`` inclusive."""
    dt = 1.0 / rate_hz
    n = int(math.floor(duration / dt + 1e-9))
    times = np.arange(n + 1) * dt
    if duration - times[-1] > _TIME_TOL:
        times = np.append(times, duration)
    return times


def _right_hand_side(oriented: OrientedAirflow, xi: np.ndarray, shape: tuple[int, ...]):
    xi1, xi2, xi3 = xi[:, 0], xi[:, 1], xi[:, 2]

    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        state = y.reshape(shape)
        speed = state[..., 2]
        v_air, heading = oriented.speed_and_heading(state[..., :2])
        dv = xi1 * speed + xi2 * v_air + xi3
        dv = np.where((speed <= 0.0) & (dv < 0.0), 0.0, dv)
        dp = np.maximum(speed, 0.0)[..., None] * heading
        return np.concatenate([dp, dv[..., None]], axis=-1).ravel()

    return rhs


def _solve_segment(
    oriented: OrientedAirflow,
    state: np.ndarray,
    xi: np.ndarray,
    t0: float,
    t1: float,
    cfg: SimConfig,
    t_eval: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate ``state`` (B, M, 3) from t0 to t1; returns sample times and states."""
    sol = solve_ivp(
        _right_hand_side(oriented, xi, state.shape),
        (t0, t1),
        state.ravel(),
        method="RK45",
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        t_eval=t_eval,
    )
    if sol.status < 0:
        raise SolverError(
            f"integration failed at t = {t0:.6g} s: {sol.message}",
            t_s=t0,
            positions=state[..., :2].reshape(-1, 2).tolist(),
            speeds=state[..., 2].ravel().tolist(),
        )
    states = sol.y.T.reshape((-1, *state.shape))
    states[..., 2] = np.maximum(states[..., 2], 0.0)
    return sol.t, states


def propagate(
    oriented: OrientedAirflow,
    positions: np.ndarray,
    speeds: np.ndarray,
    xi: np.ndarray,
    duration: float,
    cfg: SimConfig,
    previous: Optional[OrientedAirflow] = None,
    rng: Optional[np.random.Generator] = None,
) -> Propagation:
    """
    Integrate B independent copies of M objects for ``duration`` seconds.

    Args:
        oriented: Field at B orientations (or 1, broadcast over the batch)
        positions: Initial positions, shape (B, M, 2)
        speeds: Initial speeds, shape (B, M)
        xi: Per-object coefficients (xi1, xi2, xi3), shape (M, 3)
        duration: Time span in seconds; 0 returns the initial state
        cfg: Tolerances, noise level, delay and output rate
        previous: Field acting during the first ``cfg.delay_s`` seconds;
            still air when omitted
        rng: Noise source; required when ``cfg.noise_sigma > 0``

    Returns:
        States sampled on the ``cfg.output_rate_hz`` grid

    Raises:
        DomainError: If duration is negative
        SolverError: If the integrator fails
    """
    if duration < 0.0:
        raise DomainError(f"duration must be >= 0, got {duration}", duration=duration)
    state = np.concatenate(
        [np.asarray(positions, dtype=float), np.maximum(speeds, 0.0)[..., None]], axis=-1
    )
    times = output_times(duration, cfg.output_rate_hz)
    if times.size == 1:
        return Propagation(t=times, positions=state[None, ..., :2], speeds=state[None, ..., 2])

    noisy = cfg.noise_sigma > 0.0
    if noisy and rng is None:
        raise ValueError("a random generator is required when noise_sigma > 0")
    before_delay = previous if previous is not None else StillAir()
    delay = min(cfg.delay_s, duration)

    def field_at(t0: float) -> OrientedAirflow:
        return before_delay if t0 < delay - _TIME_TOL else oriented

    # Segment boundaries: the delay switch, plus every output time when noise is on
    boundaries = {0.0, duration}
    if delay > _TIME_TOL:
        boundaries.add(delay)
    if noisy:
        boundaries.update(times.tolist())
    edges = np.array(sorted(boundaries))
    edges = edges[np.concatenate([[True], np.diff(edges) > _TIME_TOL])]

    samples = [state]
    for t0, t1 in zip(edges[:-1], edges[1:]):
        inside = times[(times > t0 + _TIME_TOL) & (times <= t1 + _TIME_TOL)]
        t_eval = np.append(np.clip(inside[inside < t1 - _TIME_TOL], t0, t1), t1)
        _, states = _solve_segment(field_at(t0), state, xi, t0, t1, cfg, t_eval=t_eval)
        state = states[-1].copy()
        at_output = inside.size > 0 and abs(inside[-1] - t1) <= _TIME_TOL
        if noisy and at_output:
            factor = 1.0 + rng.normal(0.0, cfg.noise_sigma, size=state.shape[:-1])
            state[..., 2] = np.maximum(state[..., 2] * factor, 0.0)

        recorded = states[: inside.size].copy()
        if at_output:
            recorded[-1] = state
        samples.extend(recorded)

    stacked = np.stack(samples)
    return Propagation(t=times, positions=stacked[..., :2], speeds=stacked[..., 2])


def coefficient_matrix(objects: Sequence[ObjectState]) -> np.ndarray:
    return np.array([obj.dynamics.as_array() for obj in objects])


def simulate(
    objects: Sequence[ObjectState],
    field: AirflowField,
    orientation: Optional[NozzleOrientation],
    duration: float,
    cfg: SimConfig,
    previous: Optional[NozzleOrientation] = None,
    rng: Optional[np.random.Generator] = None,
) -> list[Trajectory]:
    """
    Simulate objects under one nozzle orientation.

    Args:
        objects: Initial object states
        field: Airflow field model
        orientation: Nozzle orientation; ``None`` means no actuation
        duration: Time span in seconds
        cfg: Simulation settings
        previous: Orientation still acting during the actuation delay
        rng: Noise source; seeded from ``cfg.seed`` when omitted

    Returns:
        One trajectory per object, in input order, sampled at the output rate
    """
    if not objects:
        return []
    if rng is None and cfg.noise_sigma > 0.0:
        rng = np.random.default_rng(cfg.seed)

    def _orient(o: Optional[NozzleOrientation]) -> OrientedAirflow:
        if o is None:
            return StillAir()
        return field.orient(np.array([o.pan_deg]), np.array([o.tilt_deg]))

    result = propagate(
        _orient(orientation),
        np.array([[obj.position for obj in objects]]),
        np.array([[obj.speed for obj in objects]]),
        coefficient_matrix(objects),
        duration,
        cfg,
        previous=_orient(previous) if previous is not None else None,
        rng=rng,
    )
    return [
        Trajectory.from_arrays(
            obj.object_id, result.t, result.positions[:, 0, j], result.speeds[:, 0, j]
        )
        for j, obj in enumerate(objects)
    ]
