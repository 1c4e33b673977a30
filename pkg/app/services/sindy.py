"""
Sparse identification of the object speed dynamics.

Pipeline:
1. preprocess: trajectories -> one-step speed pairs with the modelled air speed
2. build_library: polynomial candidate terms in (v_obj, v_air)
3. robust_sparse_fit: bisquare IRLS plus sequential thresholding (one bootstrap)
4. ensemble_fit: bootstrap ensemble, inclusion vote, median aggregation and
   conversion of the discrete map to continuous-time coefficients
5. validate_dynamics: re-simulate the recordings with the identified model
   and score the end positions
"""

import math
from typing import Optional, Sequence

import numpy as np
import pysindy as ps
from statsmodels.robust.norms import TukeyBiweight
from statsmodels.robust.scale import mad

from app.core.errors import IdentificationError
from app.core.logging import get_logger
from app.models.dynamics import DynamicsModel, ObjectState, SimConfig, Trajectory
from app.models.field import NozzleOrientation
from app.models.sindy import (
    AIR_TERM,
    SPEED_TERM,
    AirSample,
    Conversion,
    LibrarySpec,
    SindyConfig,
    SindyResult,
    SnapshotData,
    ThresholdMode,
)
from app.services.dynamics import simulate
from app.services.field_model import AirflowField
from app.services.metrics import end_position_mape

logger = get_logger(__name__)

# Relative tolerance for uniform sampling within one trajectory
_UNIFORM_DT_RTOL = 1e-6

# Smallest singular value, relative to the largest, of an acceptable set of
# normalized library columns
_COLINEAR_RTOL = 1e-9


def build_library(data: SnapshotData, spec: LibrarySpec) -> tuple[np.ndarray, list[str]]:
    """
    Evaluate the candidate library on the snapshot rows.

    Columns for degree 3 are ``[1, v, a, v^2, v a, a^2, v^3, v^2 a, v a^2, a^3]``
    with ``v`` the object speed and ``a`` the air speed. The columns come from
    ``pysindy.PolynomialLibrary``; its space-joined monomial names are rewritten
    with ``*`` (``v_obj*v_air``).

    Returns:
        Library matrix (k, m) and the column names
    """
    v_now, _, v_air = data.arrays()
    library = ps.PolynomialLibrary(degree=spec.max_degree, include_bias=spec.include_constant)
    library.fit(np.ones((1, 2)))
    names = [
        name.replace(" ", "*")
        for name in library.get_feature_names(input_features=[SPEED_TERM, AIR_TERM])
    ]
    if v_now.size == 0:
        return np.empty((0, len(names))), names
    columns = np.asarray(library.transform(np.column_stack([v_now, v_air])), dtype=float)
    return columns.reshape(v_now.size, len(names)), names


def _rms(values: np.ndarray, axis: Optional[int] = None) -> np.ndarray:
    return np.sqrt(np.mean(np.square(values), axis=axis))


def _well_conditioned(columns: np.ndarray) -> bool:
    singular = np.linalg.svd(columns, compute_uv=False)
    return bool(singular[-1] > _COLINEAR_RTOL * singular[0])


def _drop_colinear(library: np.ndarray, active: np.ndarray, names: Sequence[str]) -> np.ndarray:
    """Keep columns in library order while each one adds rank; warn about the others."""
    kept = np.zeros_like(active)
    norms = _rms(library, axis=0)
    for j in np.flatnonzero(active):
        trial = kept.copy()
        trial[j] = True
        if _well_conditioned(library[:, trial] / norms[trial]):
            kept = trial
        else:
            logger.warning(f"Dropping colinear library column '{names[j]}'")
    return kept


def irls_fit(library: np.ndarray, target: np.ndarray, cfg: SindyConfig) -> np.ndarray:
    """
    Least squares with Tukey bisquare weights on scaled residuals.

    The residual scale is the MAD about zero, floored at
    ``1e-10 * max(1, rms(target))``; an exact initial fit is returned as is.
    """
    norm = TukeyBiweight(c=cfg.bisquare_c)
    coef = np.linalg.lstsq(library, target, rcond=None)[0]
    resid = target - library @ coef
    floor = 1e-10 * max(1.0, float(_rms(target)))
    scale = float(mad(resid, center=0.0))
    if scale <= floor:
        return coef

    weights = np.ones_like(target)
    for _ in range(cfg.max_irls_iter):
        new_weights = norm.weights(resid / scale)
        if np.count_nonzero(new_weights) < library.shape[1]:
            break
        sqrt_w = np.sqrt(new_weights)
        coef = np.linalg.lstsq(library * sqrt_w[:, None], target * sqrt_w, rcond=None)[0]
        resid = target - library @ coef
        converged = float(np.max(np.abs(new_weights - weights))) < cfg.irls_tol
        weights = new_weights
        if converged:
            break
        scale = max(float(mad(resid, center=0.0)), floor)
    return coef


def _magnitudes(coef: np.ndarray, norms: np.ndarray, mode: ThresholdMode) -> np.ndarray:
    if mode is ThresholdMode.NORMALIZED:
        return np.abs(coef) * norms
    return np.abs(coef)


def robust_sparse_fit(
    library: np.ndarray,
    target: np.ndarray,
    cfg: SindyConfig,
    names: Optional[Sequence[str]] = None,
) -> np.ndarray:
    """
    One sparse robust fit: IRLS, threshold at lambda, refit, until the active set is stable.

    In normalized mode a coefficient survives when ``|coef| * rms(column) >= lambda``.
    Every pass first drops columns that are colinear with earlier active ones
    on the rows at hand.

    Args:
        library: Candidate library (k, m), k > m
        target: Next-step speeds (k,)
        cfg: Threshold and IRLS settings
        names: Column names used in warnings

    Returns:
        Sparse coefficient vector (m,)

    Raises:
        IdentificationError: If there are not more rows than columns
    """
    k, m = library.shape
    if k <= m:
        raise IdentificationError(
            f"need more rows than library terms ({k} rows, {m} terms)", rows=k, terms=m
        )
    names = list(names) if names is not None else [f"theta_{j}" for j in range(m)]
    norms = _rms(library, axis=0)
    active = norms > 0.0

    coef = np.zeros(m)
    for _ in range(m + 1):
        active = _drop_colinear(library, active, names)
        if not active.any():
            return np.zeros(m)
        coef = np.zeros(m)
        coef[active] = irls_fit(library[:, active], target, cfg)
        keep = active & (_magnitudes(coef, norms, cfg.threshold_mode) >= cfg.threshold)
        if np.array_equal(keep, active):
            break
        active = keep
    coef[~active] = 0.0
    return coef


def _continuous(
    coef: np.ndarray, names: list[str], dt: float, conversion: Conversion
) -> tuple[np.ndarray, Conversion]:
    """
    Continuous-time coefficients and the conversion actually applied.

    The exact conversion needs ``0 < c_v < 1``; outside that range the forward
    difference is used instead and a warning is logged.
    """
    if SPEED_TERM not in names:
        raise IdentificationError(f"library has no '{SPEED_TERM}' term to convert")
    v = names.index(SPEED_TERM)
    c_v = float(coef[v])
    if conversion is Conversion.EXACT and not 0.0 < c_v < 1.0:
        logger.warning(
            f"Exact conversion needs 0 < c_v < 1, got {c_v:.6g}; using the forward difference"
        )
        conversion = Conversion.FORWARD_DIFFERENCE

    if conversion is Conversion.FORWARD_DIFFERENCE:
        xi = coef / dt
        xi[v] = (c_v - 1.0) / dt
        return xi, conversion

    xi1 = math.log(c_v) / dt
    xi = coef * xi1 / (c_v - 1.0)
    xi[v] = xi1
    return xi, conversion


def r_squared(target: np.ndarray, predicted: np.ndarray) -> float:
    ss_res = float(np.sum((target - predicted) ** 2))
    ss_tot = float(np.sum((target - np.mean(target)) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def ensemble_fit(
    data: SnapshotData,
    spec: Optional[LibrarySpec] = None,
    cfg: Optional[SindyConfig] = None,
) -> SindyResult:
    """
    Bootstrap ensemble of robust sparse fits aggregated by median.

    Each bootstrap draws ``round(bootstrap_fraction * k)`` rows with replacement
    from a generator spawned off ``cfg.seed``; a single bootstrap fits the full
    data set. A term is active when nonzero in at least ``inclusion_threshold``
    of the bootstraps; its coefficient is the median of its nonzero values,
    and a final lambda threshold restores sparsity.

    Raises:
        IdentificationError: If the data is empty or too short for the library
    """
    spec = spec or LibrarySpec()
    cfg = cfg or SindyConfig()
    if data.k == 0:
        raise IdentificationError("no snapshot rows to identify from")

    library, names = build_library(data, spec)
    _, target, _ = data.arrays()
    k, m = library.shape
    if k <= m:
        raise IdentificationError(
            f"need more rows than library terms ({k} rows, {m} terms)", rows=k, terms=m
        )

    if cfg.n_bootstraps == 1:
        per_bootstrap = np.array([robust_sparse_fit(library, target, cfg, names)])
    else:
        n_draw = max(m + 1, int(round(cfg.bootstrap_fraction * k)))
        fits = []
        for child in np.random.SeedSequence(cfg.seed).spawn(cfg.n_bootstraps):
            rows = np.random.default_rng(child).integers(0, k, size=n_draw)
            fits.append(robust_sparse_fit(library[rows], target[rows], cfg, names))
        per_bootstrap = np.array(fits)

    nonzero = per_bootstrap != 0.0
    included = nonzero.mean(axis=0) >= cfg.inclusion_threshold
    coef = np.zeros(m)
    for j in np.flatnonzero(included):
        coef[j] = float(np.median(per_bootstrap[nonzero[:, j], j]))
    norms = _rms(library, axis=0)
    coef[_magnitudes(coef, norms, cfg.threshold_mode) < cfg.threshold] = 0.0

    xi, conversion = _continuous(coef, names, data.dt, cfg.conversion)
    r2 = r_squared(target, library @ coef)
    active = [name for name, c in zip(names, coef) if c != 0.0]
    logger.info(
        f"Identified {len(active)} active term(s) {active} from {k} rows, "
        f"{cfg.n_bootstraps} bootstrap(s), R^2 = {r2:.4f}"
    )
    return SindyResult(
        terms=names,
        xi_discrete=coef.tolist(),
        xi_continuous=xi.tolist(),
        active_terms=active,
        r_squared=r2,
        per_bootstrap=per_bootstrap.tolist(),
        dt=data.dt,
        n_rows=k,
        conversion=conversion,
    )


def _central_speeds(xy: np.ndarray, dt: float) -> np.ndarray:
    """Speeds at samples 1 .. n-2 from central differences of positions."""
    return np.hypot(*(xy[2:] - xy[:-2]).T) / (2.0 * dt)


def preprocess(
    trajectories: Sequence[tuple[Trajectory, NozzleOrientation]],
    field: AirflowField,
    cfg: Optional[SindyConfig] = None,
) -> SnapshotData:
    """
    Convert recorded trajectories into one-step speed snapshots.

    Speeds come from central differences of positions. Consecutive pairs
    where both speeds are below ``cfg.stationary_threshold`` are dropped; pairs
    never span a gap. The air speed is taken at the current position or at the
    midpoint of the step (``cfg.air_sample``).

    Args:
        trajectories: (trajectory, nozzle orientation) pairs
        field: Field model used for the air speed column
        cfg: Thresholds and air sampling mode

    Returns:
        Snapshot rows; empty (with a warning) when every object stood still

    Raises:
        IdentificationError: If trajectories use different sample intervals
    """
    cfg = cfg or SindyConfig()
    v_now: list[np.ndarray] = []
    v_next: list[np.ndarray] = []
    v_air: list[np.ndarray] = []
    dt: Optional[float] = None

    for trajectory, orientation in trajectories:
        if len(trajectory) < 3:
            logger.warning(
                f"Skipping trajectory of object {trajectory.object_id}: "
                f"{len(trajectory)} sample(s), need at least 3"
            )
            continue
        steps = np.diff(np.asarray(trajectory.t))
        step = float(np.median(steps))
        if step <= 0.0 or np.max(np.abs(steps - step)) > _UNIFORM_DT_RTOL * max(step, 1.0):
            logger.warning(
                f"Skipping trajectory of object {trajectory.object_id}: non-uniform sampling"
            )
            continue
        if dt is None:
            dt = step
        elif abs(step - dt) > _UNIFORM_DT_RTOL * dt:
            raise IdentificationError(
                f"trajectories use different sample intervals ({dt} s and {step} s)"
            )

        xy = trajectory.xy
        speeds = _central_speeds(xy, step)
        if speeds.size < 2:
            continue
        now, nxt = speeds[:-1], speeds[1:]
        moving = (now >= cfg.stationary_threshold) | (nxt >= cfg.stationary_threshold)

        # Speed index i belongs to sample i + 1
        sample_xy = xy[1:-2]
        if cfg.air_sample is AirSample.MIDPOINT:
            sample_xy = 0.5 * (xy[1:-2] + xy[2:-1])
        oriented = field.orient(np.array([orientation.pan_deg]), np.array([orientation.tilt_deg]))
        air, _ = oriented.speed_and_heading(sample_xy[None, :, :])

        v_now.append(now[moving])
        v_next.append(nxt[moving])
        v_air.append(air[0][moving])

    if dt is None:
        dt = SnapshotData.model_fields["dt"].default
    data = SnapshotData.from_arrays(
        np.concatenate(v_now) if v_now else np.empty(0),
        np.concatenate(v_next) if v_next else np.empty(0),
        np.concatenate(v_air) if v_air else np.empty(0),
        dt,
    )
    if data.k == 0:
        logger.warning("All trajectories were stationary; no snapshot rows produced")
    else:
        logger.info(f"Preprocessed {len(trajectories)} trajectories into {data.k} snapshot rows")
    return data


def validate_dynamics(
    trajectories: Sequence[tuple[Trajectory, NozzleOrientation]],
    field: AirflowField,
    dynamics: DynamicsModel,
    sim: SimConfig,
) -> float:
    """
    End-position MAPE (percent) of noise-free re-simulations of the recordings.

    Each trajectory is replayed from its first recorded position and speed for
    its recorded duration under its own orientation.

    Raises:
        DomainError: If no recorded object moved
    """
    noiseless = sim.model_copy(update={"noise_sigma": 0.0, "delay_s": 0.0})
    predicted: list[Trajectory] = []
    observed: list[Trajectory] = []
    for trajectory, orientation in trajectories:
        if len(trajectory) < 2:
            continue
        start = ObjectState(
            object_id=trajectory.object_id,
            position=(trajectory.x[0], trajectory.y[0]),
            speed=max(trajectory.speed[0], 0.0),
            dynamics=dynamics,
        )
        duration = trajectory.t[-1] - trajectory.t[0]
        predicted.extend(simulate([start], field, orientation, duration, noiseless))
        observed.append(trajectory)
    error = end_position_mape(predicted, observed)
    logger.info(f"Re-simulated {len(observed)} trajectories: end-position MAPE {error:.2f}%")
    return error
