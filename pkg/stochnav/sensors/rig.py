from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import InvariantViolation, OutsideFreeSpaceError, UnsupportedEstimatorError
from ..geometry.obstacles import Obstacle, Projection, SphereObstacle, as_point, boundary_curvature_radius
from ..geometry.world import World
from .noise import NoiseModel, Quantity, Substreams

logger = logging.getLogger(__name__)

# smallest eigenvalue kept when a noisy ellipse matrix is projected back to PD
PD_EIGENVALUE_FLOOR = 1e-6


class EstimatorKind(str, Enum):
    EXACT = "exact"
    CIRCLE = "circle"
    ELLIPSE = "ellipse"


_ESTIMATOR_ALIASES = {
    "exact": EstimatorKind.EXACT,
    "oracle": EstimatorKind.EXACT,
    "circle": EstimatorKind.CIRCLE,
    "circle-fit": EstimatorKind.CIRCLE,
    "ellipse": EstimatorKind.ELLIPSE,
    "ellipse-fit": EstimatorKind.ELLIPSE,
}


def estimator_kind(value: Any) -> EstimatorKind:
    if isinstance(value, EstimatorKind):
        return value
    try:
        return _ESTIMATOR_ALIASES[str(value).lower()]
    except KeyError:
        raise UnsupportedEstimatorError(f"unknown estimator {value!r}") from None


@dataclass(frozen=True)
class SensorRig:
    """Sensing range, noise, obstacle model and seed of one agent.

    `beta_scale` and `objective_scale` are positive constants the raw
    estimate is divided by (once per sensed factor and once for the
    objective); they leave the estimate direction unchanged between
    awareness changes.
    """

    range_c: float = 7.0
    noise: NoiseModel = field(default_factory=NoiseModel)
    estimator: EstimatorKind = EstimatorKind.CIRCLE
    seed: int = 0
    bound: float = math.inf
    beta_scale: float = 1.0
    objective_scale: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "estimator", estimator_kind(self.estimator))
        object.__setattr__(self, "seed", int(self.seed))
        if not self.range_c > 0:
            raise InvariantViolation(f"sensing range must be positive, got {self.range_c}")
        if not self.bound > 0:
            raise InvariantViolation(f"estimate bound must be positive, got {self.bound}")
        if not (self.beta_scale > 0 and self.objective_scale > 0):
            raise InvariantViolation("normalization scales must be positive")

    @property
    def streams(self) -> Substreams:
        return Substreams(self.seed)

    def with_seed(self, seed: int) -> "SensorRig":
        return dataclasses.replace(self, seed=seed)

    def with_bound(self, bound: float) -> "SensorRig":
        return dataclasses.replace(self, bound=bound)

    def normalization(self, factor_count: int) -> float:
        return self.objective_scale * self.beta_scale ** factor_count

    def to_dict(self) -> Dict[str, Any]:
        data = {"range_c": self.range_c, "estimator": self.estimator.value, "seed": self.seed}
        data.update(self.noise.to_dict())
        data.update(
            {
                "bound": self.bound if math.isfinite(self.bound) else None,
                "beta_scale": self.beta_scale,
                "objective_scale": self.objective_scale,
            }
        )
        return data


@dataclass
class ObstacleReading:
    """Batched noisy observations of one sensed obstacle."""

    index: int
    truth: Projection
    distance: np.ndarray
    true_curvature: float = math.nan
    curvature: Optional[np.ndarray] = None
    normal: Optional[np.ndarray] = None
    ellipse_center: Optional[np.ndarray] = None
    ellipse_matrix: Optional[np.ndarray] = None
    ellipse_radius: Optional[np.ndarray] = None
    clamped: int = 0
    pd_projected: int = 0


@dataclass
class Measurements:
    x: np.ndarray
    t: int
    draws: int
    model: EstimatorKind
    awareness: Tuple[int, ...]
    f0: np.ndarray
    grad_f0: np.ndarray
    workspace_value: float
    workspace_gradient: np.ndarray
    readings: Dict[int, ObstacleReading]
    normalization: float
    bound: float

    @property
    def clamped(self) -> int:
        return sum(r.clamped for r in self.readings.values())

    @property
    def pd_projected(self) -> int:
        return sum(r.pd_projected for r in self.readings.values())


def _awareness(probes: Sequence[Projection], range_c: float) -> Tuple[int, ...]:
    return (0,) + tuple(i for i, p in enumerate(probes) if i > 0 and p.distance <= range_c)


def awareness_set(world: World, rig: SensorRig, x: Any) -> Tuple[int, ...]:
    """Indices of the boundaries within range; the workspace shell (0) is always sensed."""
    x = as_point(x)
    if not world.in_free_space(x):
        raise OutsideFreeSpaceError(f"outside free space: {x.tolist()}")
    return _awareness(world.probes(x), rig.range_c)


def curvature_radius(obstacle: Obstacle, point: Any) -> float:
    if isinstance(obstacle, SphereObstacle):
        return obstacle.radius
    return boundary_curvature_radius(obstacle, point)


def _project_pd(matrices: np.ndarray) -> Tuple[np.ndarray, int]:
    w, v = np.linalg.eigh(matrices)
    bad = np.min(w, axis=-1) < PD_EIGENVALUE_FLOOR
    if not np.any(bad):
        return matrices, 0
    w = np.maximum(w, PD_EIGENVALUE_FLOOR)
    fixed = np.einsum("...ij,...j,...kj->...ik", v, w, v)
    return np.where(bad[:, None, None], fixed, matrices), int(np.sum(bad))


def _circle_reading(
    ob: Obstacle, index: int, probe: Projection, rig: SensorRig, t: int, draws: int, noisy: bool
) -> ObstacleReading:
    d = probe.distance
    n = probe.normal.size
    streams = rig.streams
    noise = rig.noise
    radius = curvature_radius(ob, probe.point)
    d_hat = np.full(draws, d)
    r_hat = np.full(draws, radius)
    n_hat = np.tile(probe.normal, (draws, 1))
    clamped = 0
    if noisy:
        d_hat += streams.normal(t, index, Quantity.DISTANCE, noise.distance_std(d), draws)
        r_hat += streams.normal(t, index, Quantity.CURVATURE, noise.curvature_std(d), draws)
        n_hat += streams.normal(t, index, Quantity.NORMAL, noise.normal_std(d), (draws, n))
        negative = d_hat < 0
        clamped = int(np.sum(negative)) + int(np.sum(r_hat < 0))
        d_hat = np.maximum(d_hat, 0.0)
        r_hat = np.maximum(r_hat, 0.0)
        norms = np.linalg.norm(n_hat, axis=1, keepdims=True)
        n_hat = np.where(norms > 0, n_hat / np.where(norms > 0, norms, 1.0), probe.normal)
    return ObstacleReading(
        index=index,
        truth=probe,
        distance=d_hat,
        true_curvature=radius,
        curvature=r_hat,
        normal=n_hat,
        clamped=clamped,
    )


def _ellipse_reading(
    ob: Obstacle, index: int, probe: Projection, rig: SensorRig, t: int, draws: int, noisy: bool
) -> ObstacleReading:
    d = probe.distance
    model = ob.ellipse_model()
    n = model.center.size
    streams = rig.streams
    std = rig.noise.distance_std(d)
    center = np.tile(model.center, (draws, 1))
    radius = np.full(draws, model.radius)
    matrix = np.tile(model.matrix, (draws, 1, 1))
    distance = np.full(draws, d)
    clamped = projected = 0
    if noisy:
        distance += streams.normal(t, index, Quantity.DISTANCE, std, draws)
        clamped = int(np.sum(distance < 0))
        distance = np.maximum(distance, 0.0)
        center += streams.normal(t, index, Quantity.ELLIPSE_CENTER, std, (draws, n))
        radius = np.abs(radius + streams.normal(t, index, Quantity.ELLIPSE_RADIUS, std, draws))
        raw = streams.normal(t, index, Quantity.ELLIPSE_MATRIX, std * float(np.max(np.abs(model.matrix))), (draws, n, n))
        matrix = matrix + np.triu(raw) + np.swapaxes(np.triu(raw, 1), -1, -2)
        matrix, projected = _project_pd(matrix)
    return ObstacleReading(
        index=index,
        truth=probe,
        distance=distance,
        ellipse_center=center,
        ellipse_matrix=matrix,
        ellipse_radius=radius,
        clamped=clamped,
        pd_projected=projected,
    )


def measure(world: World, rig: SensorRig, x: Any, t: int, draws: int = 1) -> Measurements:
    """Noisy local readings at x for step t, `draws` independent copies at once."""
    x = as_point(x)
    if not world.in_free_space(x):
        raise OutsideFreeSpaceError(f"outside free space: {x.tolist()}")
    if draws < 1:
        raise ValueError(f"draws must be positive, got {draws}")
    probes = world.probes(x)
    awareness = _awareness(probes, rig.range_c)
    noisy = rig.estimator is not EstimatorKind.EXACT
    model = EstimatorKind.ELLIPSE if rig.estimator is EstimatorKind.ELLIPSE else EstimatorKind.CIRCLE
    streams = rig.streams
    n = world.dim

    f0 = np.full(draws, world.objective.value(x))
    grad_f0 = np.tile(world.objective.gradient(x), (draws, 1))
    if noisy:
        f0 += streams.normal(t, 0, Quantity.OBJECTIVE, rig.noise.sigma_f0, draws)
        grad_f0 += streams.normal(t, 0, Quantity.OBJECTIVE_GRADIENT, rig.noise.sigma_grad_f0, (draws, n))

    read = _ellipse_reading if model is EstimatorKind.ELLIPSE else _circle_reading
    readings = {i: read(world.obstacle(i), i, probes[i], rig, t, draws, noisy) for i in awareness if i > 0}
    measurements = Measurements(
        x=x,
        t=int(t),
        draws=draws,
        model=model,
        awareness=awareness,
        f0=f0,
        grad_f0=grad_f0,
        workspace_value=world.workspace.value(x),
        workspace_gradient=world.workspace.gradient(x),
        readings=readings,
        normalization=rig.normalization(len(awareness)),
        bound=rig.bound,
    )
    if measurements.clamped:
        logger.warning("step %d: %d noisy distance readings clamped at 0", t, measurements.clamped)
    if measurements.pd_projected:
        logger.warning("step %d: %d noisy ellipse matrices projected to PD", t, measurements.pd_projected)
    return measurements
