from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Optional, Tuple

import numpy as np

from ..errors import UnsupportedEstimatorError
from ..geometry.obstacles import as_point
from ..geometry.world import World, product_with_gradient
from ..potentials.potential import PotentialKind, PotentialSpec, make_potential
from .rig import EstimatorKind, Measurements, SensorRig, measure

logger = logging.getLogger(__name__)


@dataclass
class GradientEstimate:
    """Estimated descent direction.

    `direction` has shape (n,) for a single draw and (draws, n) for a batch.
    `clipped` counts the draws whose norm was cut back to the rig bound.
    """

    direction: np.ndarray
    awareness: Tuple[int, ...]
    measurements: Optional[Measurements] = None
    clipped: int = 0

    @property
    def norm(self) -> np.ndarray:
        return np.linalg.norm(self.direction, axis=-1)


def fitted_factors(measurements: Measurements) -> Tuple[np.ndarray, np.ndarray]:
    """Hallucinated obstacle factors over the awareness set, workspace first.

    Returns values (draws, F) and gradients (draws, F, n). The workspace shell
    is known and enters exactly.
    """
    m = measurements
    draws, n = m.grad_f0.shape
    values = [np.full(draws, m.workspace_value)]
    grads = [np.tile(m.workspace_gradient, (draws, 1))]
    for i in m.awareness[1:]:
        r = m.readings[i]
        if m.model is EstimatorKind.ELLIPSE:
            y = m.x - r.ellipse_center
            ay = np.einsum("dij,dj->di", r.ellipse_matrix, y)
            value = np.einsum("di,di->d", y, ay) - r.ellipse_radius ** 2
            inside = value < 0
            if np.any(inside):
                logger.warning("step %d: agent inside %d fitted ellipses of obstacle %d", m.t, int(np.sum(inside)), i)
            values.append(np.maximum(value, 0.0))
            grads.append(2.0 * ay)
        else:
            d, radius = r.distance, r.curvature
            values.append(d * d + 2.0 * radius * d)
            grads.append(2.0 * (d + radius)[:, None] * r.normal)
    return np.stack(values, axis=1), np.stack(grads, axis=1)


def _clip(directions: np.ndarray, bound: float) -> Tuple[np.ndarray, int]:
    if not np.isfinite(bound):
        return directions, 0
    norms = np.linalg.norm(directions, axis=-1)
    over = norms > bound
    if not np.any(over):
        return directions, 0
    factor = np.where(over, bound / np.where(over, norms, 1.0), 1.0)
    return directions * factor[..., None], int(np.sum(over))


def _combine(measurements: Measurements, k: float, kind: PotentialKind) -> GradientEstimate:
    m = measurements
    values, grads = fitted_factors(m)
    beta, grad_beta = product_with_gradient(values, grads)
    if kind is PotentialKind.LOG_BARRIER:
        directions = beta[:, None] * m.grad_f0 - grad_beta / k
    else:
        directions = beta[:, None] * m.grad_f0 - (m.f0 / k)[:, None] * grad_beta
    directions, clipped = _clip(directions / m.normalization, m.bound)
    if clipped:
        logger.warning("step %d: %d of %d estimates clipped to norm %g", m.t, clipped, m.draws, m.bound)
    return GradientEstimate(
        direction=directions[0] if m.draws == 1 else directions,
        awareness=m.awareness,
        measurements=m,
        clipped=clipped,
    )


def circle_fit_estimate(measurements: Measurements, k: float) -> GradientEstimate:
    """Rimon-Koditschek estimate with every sensed obstacle hallucinated as its osculating circle."""
    if measurements.model is not EstimatorKind.CIRCLE:
        raise UnsupportedEstimatorError("circle fit needs distance, normal and curvature readings")
    return _combine(measurements, k, PotentialKind.RIMON_KODITSCHEK)


def ellipse_fit_estimate(measurements: Measurements, k: float) -> GradientEstimate:
    if measurements.model is not EstimatorKind.ELLIPSE:
        raise UnsupportedEstimatorError("ellipse fit needs ellipse parameter readings")
    return _combine(measurements, k, PotentialKind.RIMON_KODITSCHEK)


def log_barrier_estimate(measurements: Measurements, k: float) -> GradientEstimate:
    """beta_hat * grad_f0_hat - grad_beta_hat / k, with factors from the rig's obstacle model."""
    return _combine(measurements, k, PotentialKind.LOG_BARRIER)


def exact_estimate(world: World, rig: SensorRig, spec: PotentialSpec, x: Any, draws: int = 1) -> GradientEstimate:
    """Oracle: the true descent direction over every boundary, normalized like the sensed ones."""
    x = as_point(x)
    direction = make_potential(world, spec).direction(x) / rig.normalization(world.m + 1)
    directions, clipped = _clip(np.tile(direction, (draws, 1)), rig.bound)
    return GradientEstimate(
        direction=directions[0] if draws == 1 else directions,
        awareness=tuple(range(world.m + 1)),
        clipped=clipped,
    )


def estimate(
    world: World,
    rig: SensorRig,
    spec: PotentialSpec,
    x: Any,
    t: int,
    draws: int = 1,
) -> GradientEstimate:
    """Sense at x for step t and build the estimate the rig's model prescribes."""
    if rig.estimator is EstimatorKind.EXACT:
        return exact_estimate(world, rig, spec, x, draws)
    measurements = measure(world, rig, x, t, draws)
    if spec.kind is PotentialKind.LOG_BARRIER:
        return log_barrier_estimate(measurements, spec.k)
    if rig.estimator is EstimatorKind.ELLIPSE:
        return ellipse_fit_estimate(measurements, spec.k)
    return circle_fit_estimate(measurements, spec.k)
