from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .. import DEFAULT_BOUNDARY_SAMPLES
from ..errors import OutsideFreeSpaceError
from ..geometry.world import World

logger = logging.getLogger(__name__)


def _finite_or_none(v: float) -> Optional[float]:
    return v if math.isfinite(v) else None


@dataclass
class ObstacleCondition:
    index: int
    mu_min: float
    # max over boundary samples of grad beta_i(x_s)^T (x_s - x*) / |x_s - x*|^2
    worst_ratio: float
    worst_point: np.ndarray
    lhs: float
    margin: float
    passed: bool
    # largest lambda_max / lambda_min this obstacle tolerates
    admissible_condition: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "mu_min": self.mu_min,
            "worst_ratio": self.worst_ratio,
            "worst_point": self.worst_point.tolist(),
            "lhs": self.lhs,
            "margin": self.margin,
            "passed": self.passed,
            "admissible_condition": _finite_or_none(self.admissible_condition),
        }


@dataclass
class ConditionReport:
    condition_number: float
    obstacles: List[ObstacleCondition] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.obstacles)

    @property
    def n_cond(self) -> float:
        """Largest objective condition number for which every obstacle still passes."""
        return min((o.admissible_condition for o in self.obstacles), default=math.inf)

    @property
    def minimum_margin(self) -> float:
        return min((o.margin for o in self.obstacles), default=math.inf)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "condition_number": self.condition_number,
            "n_cond": _finite_or_none(self.n_cond),
            "minimum_margin": _finite_or_none(self.minimum_margin),
            "obstacles": [o.to_dict() for o in self.obstacles],
        }


def check_condition(world: World, boundary_samples: int = DEFAULT_BOUNDARY_SAMPLES) -> ConditionReport:
    """Sweep every obstacle boundary for the navigation-function condition.

    (lambda_max / lambda_min) * grad beta_i(x_s)^T (x_s - x*) / |x_s - x*|^2 < mu_min^i
    Only boundary points behind the obstacle (seen from x*) can make the
    left-hand side positive.
    """
    if boundary_samples < 1000:
        raise ValueError(f"check_condition needs at least 1000 boundary samples, got {boundary_samples}")
    xstar = world.objective.minimizer
    if not world.in_interior(xstar):
        raise OutsideFreeSpaceError(f"x* {xstar.tolist()} is not in the interior of the free space")
    kappa = world.objective.condition_number
    report = ConditionReport(condition_number=kappa)
    for i, ob in enumerate(world.obstacles, start=1):
        points = ob.boundary_points(boundary_samples)
        offsets = points - xstar
        grads = np.array([ob.gradient(p) for p in points])
        ratios = np.einsum("ij,ij->i", grads, offsets) / np.einsum("ij,ij->i", offsets, offsets)
        worst = int(np.argmax(ratios))
        ratio = float(ratios[worst])
        mu = float(ob.mu_min)
        lhs = kappa * ratio
        admissible = mu / ratio if ratio > 0 else math.inf
        entry = ObstacleCondition(
            index=i,
            mu_min=mu,
            worst_ratio=ratio,
            worst_point=points[worst],
            lhs=lhs,
            margin=mu - lhs,
            passed=lhs < mu,
            admissible_condition=admissible,
        )
        logger.debug("condition obstacle %d: lhs %.6g mu_min %.6g margin %.6g", i, lhs, mu, entry.margin)
        report.obstacles.append(entry)
    return report
