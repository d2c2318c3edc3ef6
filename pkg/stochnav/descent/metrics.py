from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional

import numpy as np
from scipy.spatial import cKDTree

from ..geometry.world import World
from ..potentials.critical import locate_minimum
from ..potentials.potential import PotentialSpec
from .sgd import default_stop_radius
from .trajectory import TerminationStatus, Trajectory


@dataclass(frozen=True)
class ConvergenceMetrics:
    status: str
    steps: int
    final_distance_xstar: float
    final_distance_minimum: float
    path_length: float
    min_clearance: float
    max_phi: float
    # first t with |x_t - minimum| < stop radius, None if never
    steps_to_stop: Optional[int]

    @property
    def collided(self) -> bool:
        return self.status == TerminationStatus.COLLISION.value

    def to_dict(self) -> Dict[str, Any]:
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in asdict(self).items()}


def path_length(trajectory: Trajectory) -> float:
    points = trajectory.points
    if len(points) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(points, axis=0), axis=1)))


def convergence_metrics(
    trajectory: Trajectory,
    world: World,
    spec: PotentialSpec,
    stop_radius: Optional[float] = None,
    minimum: Optional[np.ndarray] = None,
) -> ConvergenceMetrics:
    minimum = locate_minimum(world, spec) if minimum is None else minimum
    radius = default_stop_radius(world) if stop_radius is None else stop_radius
    points = trajectory.points
    end = trajectory.end
    to_min = np.linalg.norm(points - minimum, axis=1)
    inside = np.nonzero(to_min < radius)[0]
    clearances = np.array([r.clearance for r in trajectory.records])
    phis = np.array([r.phi for r in trajectory.records])
    return ConvergenceMetrics(
        status=trajectory.status.value,
        steps=trajectory.steps,
        final_distance_xstar=float(np.linalg.norm(end - world.objective.minimizer)),
        final_distance_minimum=float(to_min[-1]),
        path_length=path_length(trajectory),
        min_clearance=float(np.nanmin(clearances)) if np.any(np.isfinite(clearances)) else math.nan,
        max_phi=float(np.nanmax(phis)) if np.any(np.isfinite(phis)) else math.nan,
        steps_to_stop=int(trajectory.records[inside[0]].t) if inside.size else None,
    )


def deviation(trajectory: Trajectory, baseline: Trajectory) -> float:
    """Mean distance from each iterate to the nearest point of the baseline path."""
    distances, _ = cKDTree(baseline.points).query(trajectory.points)
    return float(np.mean(distances))
