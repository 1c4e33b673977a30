"""
Building a field model from gridded air speed data.

- fuse_grids blends a CFD grid into a measured grid with a weight that is 1 at
  the stagnation point and decays exponentially with distance.
- fit_profiles fits one radial profile per 1 deg alpha bin. The amplitude is
  solved linearly and the two decay rates by bounded trust-region least
  squares, so every fit satisfies the profile ordering and peaks inside
  the configured radius range.
- build_field_model stacks per-tilt fits into a FieldModel.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from app.core.errors import DomainError, FieldFitError
from app.core.logging import get_logger
from app.models.field import (
    FieldGeometry,
    FitSettings,
    GridSource,
    Point,
    ProfileFit,
    RadialProfile,
    VelocityGrid,
)
from app.services.field_model import ALPHA_BINS_DEG, FieldModel
from app.services.geometry import projection_point, stagnation_from_projection
from app.services.metrics import mape

logger = get_logger(__name__)

# Points further apart than this are not the same grid location
_COREGISTRATION_TOL = 1e-9


def fuse_grids(meas: VelocityGrid, cfd: VelocityGrid, s: Point, r0: float) -> VelocityGrid:
    """
    Blend CFD speeds into measured speeds around the stagnation point.

    The fused speed is ``w * cfd + (1 - w) * meas`` with ``w = exp(-r / r0)``.

    Raises:
        DomainError: If the grids are not co-registered or r0 <= 0
    """
    if r0 <= 0.0:
        raise DomainError(f"fusion scale must be positive, got {r0}", r0=r0)
    if meas.tilt_deg != cfd.tilt_deg or meas.pan_deg != cfd.pan_deg:
        raise DomainError(
            "grids were recorded at different orientations",
            meas_tilt_deg=meas.tilt_deg,
            cfd_tilt_deg=cfd.tilt_deg,
        )
    if len(meas.points) != len(cfd.points) or not np.allclose(
        meas.xy, cfd.xy, rtol=0.0, atol=_COREGISTRATION_TOL
    ):
        raise DomainError("grids do not share the same points in the same order")

    xy = meas.xy
    r = np.hypot(xy[:, 0] - s[0], xy[:, 1] - s[1])
    weight = np.exp(-r / r0)
    fused = weight * cfd.speeds + (1.0 - weight) * meas.speeds
    return VelocityGrid(
        tilt_deg=meas.tilt_deg,
        pan_deg=meas.pan_deg,
        source=GridSource.FUSED,
        points=[(float(x), float(y), float(v)) for (x, y), v in zip(xy, fused)],
    )


def _wrap_deg(angle: np.ndarray) -> np.ndarray:
    return (angle + 180.0) % 360.0 - 180.0


def _shape_bounds(settings: FitSettings) -> tuple[np.ndarray, np.ndarray]:
    lower = np.log([settings.decay_bounds[0], settings.ratio_bounds[0] - 1.0])
    upper = np.log([settings.decay_bounds[1], settings.ratio_bounds[1] - 1.0])
    return lower, upper


def _decode(theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Shape parameters (log(-b2), log(b3/b2 - 1)) to (decay, ratio)."""
    theta = np.asarray(theta, dtype=float)
    return np.exp(theta[..., 0]), 1.0 + np.exp(theta[..., 1])


def _shape_curve(r: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """exp(b2 r) - exp(b3 r) for one shape (n,) or a stack of shapes (K, n)."""
    decay, ratio = _decode(theta)
    rate = np.multiply.outer(decay, r)
    return np.exp(-rate) - np.exp(-rate * np.asarray(ratio)[..., None])


def _peak_radius(theta: np.ndarray) -> np.ndarray:
    decay, ratio = _decode(theta)
    return np.log(ratio) / (decay * (ratio - 1.0))


@dataclass(frozen=True)
class _ShapeFit:
    theta: np.ndarray
    amplitudes: np.ndarray
    cost: float


def _fit_shape(
    r: np.ndarray,
    basis: np.ndarray,
    speed: np.ndarray,
    weight: np.ndarray,
    settings: FitSettings,
    prior: Optional[np.ndarray] = None,
) -> _ShapeFit:
    """
    Weighted fit of ``speed ~ (basis @ a) * (exp(b2 r) - exp(b3 r))``.

    The amplitudes ``a`` enter linearly and are solved exactly for every
    trial shape, so only the two shape parameters are searched: first on a
    log-spaced start grid inside the bounds, then refined by bounded
    trust-region least squares. ``prior`` pulls the shape toward a pooled
    estimate with strength ``settings.shape_prior_weight``.

    Raises:
        FieldFitError: If no shape in the bounds gives a positive leading
            amplitude and a peak radius inside ``peak_radius_bounds``
    """
    sqrt_w = np.sqrt(weight)
    weighted_basis = basis * sqrt_w[:, None]
    target = sqrt_w * speed
    lower, upper = _shape_bounds(settings)
    peak_low, peak_high = settings.peak_radius_bounds
    prior_weight = settings.shape_prior_weight if prior is not None else 0.0

    def prior_cost(theta: np.ndarray) -> np.ndarray:
        if prior_weight == 0.0:
            return np.zeros(np.shape(theta)[:-1])
        return 0.5 * prior_weight**2 * np.sum((theta - prior) ** 2, axis=-1)

    def admissible(theta: np.ndarray, amplitudes: np.ndarray) -> np.ndarray:
        peak = _peak_radius(theta)
        return (amplitudes[..., 0] > 0.0) & (peak >= peak_low) & (peak <= peak_high)

    axes = [np.linspace(lo, hi, settings.start_grid_size) for lo, hi in zip(lower, upper)]
    starts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)
    design = _shape_curve(r, starts)[:, :, None] * weighted_basis[None]
    amplitudes = np.linalg.pinv(design) @ target
    residual = np.einsum("knp,kp->kn", design, amplitudes) - target
    costs = 0.5 * np.sum(residual**2, axis=1) + prior_cost(starts)
    costs = np.where(admissible(starts, amplitudes) & np.isfinite(costs), costs, np.inf)
    if not np.isfinite(costs).any():
        raise FieldFitError(
            "no profile inside the fit bounds matches the samples",
            decay_bounds=list(settings.decay_bounds),
            ratio_bounds=list(settings.ratio_bounds),
        )
    k = int(np.argmin(costs))
    best = _ShapeFit(theta=starts[k], amplitudes=amplitudes[k], cost=float(costs[k]))

    def solve_amplitudes(theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        columns = _shape_curve(r, theta)[:, None] * weighted_basis
        coef, *_ = np.linalg.lstsq(columns, target, rcond=None)
        return coef, columns @ coef - target

    def residuals(theta: np.ndarray) -> np.ndarray:
        _, res = solve_amplitudes(theta)
        if prior_weight == 0.0:
            return res
        return np.concatenate([res, prior_weight * (theta - prior)])

    sol = least_squares(
        residuals,
        np.clip(best.theta, lower, upper),
        jac="3-point",
        bounds=(lower, upper),
        method="trf",
        xtol=settings.xtol,
        ftol=settings.xtol,
        max_nfev=settings.max_iterations,
    )
    coef, res = solve_amplitudes(sol.x)
    cost = 0.5 * float(np.sum(res**2)) + float(prior_cost(sol.x))
    if np.isfinite(cost) and cost <= best.cost and admissible(sol.x, coef):
        best = _ShapeFit(theta=sol.x, amplitudes=coef, cost=cost)
    return best


def _direction_basis(delta_rad: np.ndarray, n_terms: int) -> np.ndarray:
    """Local amplitude model around a bin center: 1, sin(d), 1 - cos(d)."""
    columns = [np.ones_like(delta_rad), np.sin(delta_rad), 1.0 - np.cos(delta_rad)]
    return np.column_stack(columns[:n_terms])


def _harmonic_basis(alpha_rad: np.ndarray) -> np.ndarray:
    return np.column_stack(
        [
            np.ones_like(alpha_rad),
            np.cos(alpha_rad),
            np.sin(alpha_rad),
            np.cos(2.0 * alpha_rad),
            np.sin(2.0 * alpha_rad),
        ]
    )


def _pooled_shape(
    r: np.ndarray, alpha_rad: np.ndarray, speeds: np.ndarray, settings: FitSettings
) -> Optional[np.ndarray]:
    """Shape shared by all directions, with a second-order harmonic amplitude."""
    basis = _harmonic_basis(alpha_rad)
    if settings.shape_prior_weight == 0.0 or speeds.size < basis.shape[1] + 2:
        return None
    try:
        return _fit_shape(r, basis, speeds, np.ones_like(speeds), settings).theta
    except FieldFitError as e:
        logger.warning(f"No pooled profile shape, fitting bins without a prior: {e.message}")
        return None


def _profile(fit: _ShapeFit) -> RadialProfile:
    decay, ratio = _decode(fit.theta)
    return RadialProfile(
        b1=float(fit.amplitudes[0]), b2=-float(decay), b3=-float(decay * ratio)
    )


def fit_profiles(
    grid: VelocityGrid, s: Point, settings: Optional[FitSettings] = None
) -> list[ProfileFit]:
    """
    Fit one radial profile per alpha bin (-180 .. 179 deg relative to pan).

    Samples within ``pool_half_width_deg`` of a bin center are pooled with
    triangular weights that vanish 1 deg past the pooling edge. A sparse bin
    widens its pool in steps of ``pool_half_width_deg`` until it holds
    ``min_bin_samples`` samples or reaches ``max_half_width_deg``.

    Inside a pool the amplitude varies smoothly with direction (a constant
    plus sine and cosine terms in the offset from the bin center) and the
    bin's b1 is its value at the center. The decay rates are drawn toward
    one shape fitted to the whole grid (``shape_prior_weight``; 0 disables).

    Args:
        grid: Air speed samples for one orientation
        s: Stagnation point of that orientation
        settings: Pooling and solver controls

    Returns:
        One ProfileFit per alpha bin, in bin order

    Raises:
        FieldFitError: If the grid has no positive speeds or a bin keeps
            fewer than 3 samples
    """
    settings = settings or FitSettings()
    xy = grid.xy
    delta = xy - np.asarray(s, dtype=float)
    r = np.hypot(delta[:, 0], delta[:, 1])
    usable = r > settings.min_radius
    r = r[usable]
    speeds = grid.speeds[usable]
    alpha_rel = _wrap_deg(
        np.degrees(np.arctan2(delta[usable, 1], delta[usable, 0])) - grid.pan_deg
    )

    if speeds.size == 0 or float(speeds.max(initial=0.0)) <= 0.0:
        raise FieldFitError(
            "grid has no positive air speed to fit", tilt_deg=grid.tilt_deg
        )

    logger.info(
        f"Fitting {ALPHA_BINS_DEG.size} alpha bins at tilt {grid.tilt_deg} deg "
        f"from {speeds.size} samples"
    )
    prior = _pooled_shape(r, np.radians(alpha_rel), speeds, settings)
    fits: list[ProfileFit] = []
    for alpha in ALPHA_BINS_DEG:
        offset = _wrap_deg(alpha_rel - alpha)
        distance = np.abs(offset)
        half_width = settings.pool_half_width_deg
        while (
            np.count_nonzero(distance <= half_width) < settings.min_bin_samples
            and half_width < settings.max_half_width_deg
        ):
            half_width = min(half_width + settings.pool_half_width_deg, settings.max_half_width_deg)

        pooled = distance <= half_width
        n_samples = int(np.count_nonzero(pooled))
        if n_samples < 3 or float(speeds[pooled].max(initial=0.0)) <= 0.0:
            raise FieldFitError(
                f"alpha bin {int(alpha)} deg has {n_samples} usable samples within "
                f"{half_width} deg (need at least 3)",
                alpha_deg=int(alpha),
                tilt_deg=grid.tilt_deg,
                n_samples=n_samples,
            )

        weight = 1.0 - distance[pooled] / (half_width + 1.0)
        offset_rad = np.radians(offset[pooled])
        n_directions = np.unique(np.round(offset[pooled], 9)).size
        basis = _direction_basis(offset_rad, max(1, min(3, n_directions, n_samples - 2)))
        try:
            shape = _fit_shape(r[pooled], basis, speeds[pooled], weight, settings, prior)
        except FieldFitError as e:
            raise FieldFitError(
                f"alpha bin {int(alpha)} deg: {e.message}",
                alpha_deg=int(alpha),
                tilt_deg=grid.tilt_deg,
            ) from e

        profile = _profile(shape)
        predicted = _shape_curve(r[pooled], shape.theta) * (basis @ shape.amplitudes)
        observed = speeds[pooled]
        residual = predicted - observed
        positive = observed > 0.0
        fits.append(
            ProfileFit(
                alpha_deg=int(alpha),
                profile=profile,
                n_samples=n_samples,
                half_width_deg=half_width,
                rms_residual=float(np.sqrt(np.mean(residual**2))),
                mape=mape(predicted[positive], observed[positive]),
            )
        )

    logger.info(
        f"Fitted tilt {grid.tilt_deg} deg: median MAPE "
        f"{np.median([f.mape for f in fits]):.2f}%, widest pool "
        f"{max(f.half_width_deg for f in fits)} deg"
    )
    return fits


def grid_stagnation(grid: VelocityGrid, geometry: FieldGeometry) -> Point:
    return stagnation_from_projection(projection_point(grid.orientation, geometry), geometry)


def build_field_model(
    grids: list[VelocityGrid],
    geometry: FieldGeometry,
    settings: Optional[FitSettings] = None,
) -> tuple[FieldModel, dict[float, list[ProfileFit]]]:
    """
    Fit every grid (one per tilt node) and assemble the field model.

    Returns:
        The model and the per-tilt fit diagnostics

    Raises:
        FieldFitError: On duplicate tilts or any failed bin
    """
    if not grids:
        raise FieldFitError("no grids to fit")
    tilts = [grid.tilt_deg for grid in grids]
    if len(set(tilts)) != len(tilts):
        raise FieldFitError("each tilt node needs exactly one grid", tilt_deg=tilts)

    diagnostics: dict[float, list[ProfileFit]] = {}
    for grid in sorted(grids, key=lambda g: g.tilt_deg):
        diagnostics[grid.tilt_deg] = fit_profiles(grid, grid_stagnation(grid, geometry), settings)

    model = FieldModel.from_profiles(
        geometry, {tilt: [fit.profile for fit in fits] for tilt, fits in diagnostics.items()}
    )
    return model, diagnostics
