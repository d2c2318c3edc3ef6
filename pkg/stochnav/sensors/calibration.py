from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np

from ..geometry.world import World, sample_free_space
from ..potentials.potential import PotentialSpec
from .estimators import estimate
from .rig import SensorRig

logger = logging.getLogger(__name__)

BOUND_SAMPLES = 100_000
BOUND_FACTOR = 2.0
GAMMA_PROBES = 100
GAMMA_DRAWS = 1000
GAMMA_FLOOR = 1e-3
GAMMA_LADDER = 24


@dataclass
class Calibration:
    bound: float
    max_norm: float
    gammas: Dict[int, float] = field(default_factory=dict)

    @property
    def step_bound(self) -> float:
        """Largest eps0 for which a single step can never cross an obstacle boundary."""
        return step_bound(self.gammas, self.bound)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bound": self.bound,
            "max_norm": self.max_norm,
            "gammas": {str(i): g for i, g in sorted(self.gammas.items())},
            "eps0_max": self.step_bound if math.isfinite(self.step_bound) else None,
        }


def step_bound(gammas: Dict[int, float], bound: float) -> float:
    if not gammas:
        return math.inf
    return min(gammas.values()) / bound


def max_estimate_norm(
    world: World,
    rig: SensorRig,
    spec: PotentialSpec,
    samples: int = BOUND_SAMPLES,
    seed: int = 0,
) -> float:
    """Largest unclipped estimate norm over uniformly sampled free-space points."""
    rng = np.random.default_rng(seed)
    unclipped = rig.with_bound(math.inf)
    largest = 0.0
    for t, x in enumerate(sample_free_space(world, samples, rng)):
        largest = max(largest, float(np.linalg.norm(estimate(world, unclipped, spec, x, t).direction)))
    return largest


def outward_radius(
    world: World,
    rig: SensorRig,
    spec: PotentialSpec,
    index: int,
    probes: int = GAMMA_PROBES,
    draws: int = GAMMA_DRAWS,
    floor: float = GAMMA_FLOOR,
    distances: Optional[Sequence[float]] = None,
) -> float:
    """Largest probe distance up to which every estimate pushes away from obstacle `index`.

    Probes walk out along the boundary normals; at each distance all draws
    must satisfy -g^T grad beta_i > 0. The result is never below `floor`.
    """
    ob = world.obstacle(index)
    ladder = np.geomspace(floor, rig.range_c, GAMMA_LADDER) if distances is None else np.sort(distances)
    boundary = ob.boundary_points(probes)
    gamma = floor
    for step, d in enumerate(ladder):
        for j, p in enumerate(boundary):
            g = ob.gradient(p)
            norm = float(np.linalg.norm(g))
            if norm == 0.0:
                continue
            x = p + d * g / norm
            if not world.in_interior(x):
                continue
            est = estimate(world, rig, spec, x, step * probes + j, draws)
            dirs = est.direction.reshape(-1, world.dim)
            if np.any(dirs @ ob.gradient(x) >= 0):
                logger.debug("obstacle %d: outward property fails at distance %.3g", index, d)
                return gamma
        gamma = max(gamma, float(d))
    return gamma


def calibrate(
    world: World,
    rig: SensorRig,
    spec: PotentialSpec,
    samples: int = BOUND_SAMPLES,
    probes: int = GAMMA_PROBES,
    draws: int = GAMMA_DRAWS,
    seed: int = 0,
) -> Calibration:
    largest = max_estimate_norm(world, rig, spec, samples, seed)
    result = Calibration(bound=BOUND_FACTOR * largest, max_norm=largest)
    for i in range(1, world.m + 1):
        result.gammas[i] = outward_radius(world, rig, spec, i, probes, draws)
    logger.info(
        "calibration: B=%.6g, min gamma=%.3g, eps0 < %.3g",
        result.bound, min(result.gammas.values(), default=math.inf), result.step_bound,
    )
    return result
