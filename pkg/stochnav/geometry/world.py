from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .. import DEFAULT_BOUNDARY_SAMPLES
from ..errors import InvariantViolation
from .obstacles import (
    BOUNDARY_TOL,
    SYMMETRY_TOL,
    Obstacle,
    Projection,
    as_point,
    unit_directions,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class WorkspaceSphere:
    """beta_0(x) = r^2 - |x-c|^2, concave and nonnegative on the workspace."""

    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", as_point(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise InvariantViolation(f"workspace radius must be positive, got {self.radius}")

    @property
    def dim(self) -> int:
        return int(self.center.size)

    @property
    def value_scale(self) -> float:
        return self.radius ** 2

    def value(self, x: Any) -> float:
        y = as_point(x) - self.center
        return float(self.radius ** 2 - y @ y)

    def gradient(self, x: Any) -> np.ndarray:
        return -2.0 * (as_point(x) - self.center)

    def distance(self, x: Any) -> float:
        return self.radius - float(np.linalg.norm(as_point(x) - self.center))

    def probe(self, x: Any) -> Projection:
        """Closest shell point; the normal points from the shell into the workspace."""
        y = as_point(x) - self.center
        rho = float(np.linalg.norm(y))
        outward = y / rho if rho > 0 else np.eye(self.dim)[0]
        return Projection(point=self.center + self.radius * outward, distance=self.radius - rho, normal=-outward)

    def boundary_points(self, count: int) -> np.ndarray:
        return self.center + self.radius * unit_directions(count, self.dim)

    def to_dict(self) -> Dict[str, Any]:
        return {"center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class QuadraticObjective:
    """f_0(x) = (x-x*)^T Q (x-x*) + f_min."""

    minimizer: np.ndarray
    matrix: np.ndarray
    offset: float = 0.0

    def __post_init__(self) -> None:
        minimizer = as_point(self.minimizer)
        matrix = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "minimizer", minimizer)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "offset", float(self.offset))
        if matrix.shape != (minimizer.size, minimizer.size):
            raise InvariantViolation(f"objective matrix shape {matrix.shape} does not match dimension {minimizer.size}")
        if np.max(np.abs(matrix - matrix.T)) > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(matrix)))):
            raise InvariantViolation("objective matrix is not symmetric")
        if not self.eigenvalues[0] > 0:
            raise InvariantViolation("objective matrix is not positive definite")
        if self.offset < 0:
            raise InvariantViolation(f"objective offset must be nonnegative, got {self.offset}")

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def condition_number(self) -> float:
        return self.lambda_max / self.lambda_min

    def value(self, x: Any) -> float:
        y = as_point(x) - self.minimizer
        return float(y @ self.matrix @ y + self.offset)

    def gradient(self, x: Any) -> np.ndarray:
        return 2.0 * self.matrix @ (as_point(x) - self.minimizer)

    def hessian(self, x: Any = None) -> np.ndarray:
        return 2.0 * self.matrix

    def to_dict(self) -> Dict[str, Any]:
        return {"xstar": self.minimizer.tolist(), "Q": self.matrix.tolist(), "fmin": self.offset}


def product_with_gradient(values: np.ndarray, gradients: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Product of factors and its product-rule gradient, without divisions.

    values: (..., m), gradients: (..., m, n). Returns (..., ) and (..., n).
    Zero factors are handled exactly.
    """
    values = np.asarray(values, dtype=float)
    ones = np.ones(values.shape[:-1] + (1,))
    prefix = np.cumprod(np.concatenate([ones, values[..., :-1]], axis=-1), axis=-1)
    suffix = np.flip(np.cumprod(np.flip(np.concatenate([values[..., 1:], ones], axis=-1), axis=-1), axis=-1), axis=-1)
    others = prefix * suffix
    total = prefix[..., -1] * values[..., -1]
    return total, np.einsum("...i,...in->...n", others, gradients)


@dataclass(frozen=True, eq=False)
class World:
    workspace: WorkspaceSphere
    obstacles: Tuple[Obstacle, ...]
    objective: QuadraticObjective
    name: str = field(default="world")

    def __post_init__(self) -> None:
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        dims = {self.workspace.dim, self.objective.minimizer.size} | {o.dim for o in self.obstacles}
        if len(dims) != 1:
            raise InvariantViolation(f"inconsistent dimensions in world: {sorted(dims)}")

    @property
    def dim(self) -> int:
        return self.workspace.dim

    @property
    def m(self) -> int:
        return len(self.obstacles)

    @property
    def length_scale(self) -> float:
        return self.workspace.radius

    def obstacle(self, index: int) -> Obstacle:
        """Obstacle by its 1-based index; index 0 is the workspace shell."""
        if index < 1:
            raise IndexError("obstacle indices start at 1")
        return self.obstacles[index - 1]

    def factors(self, x: Any) -> Tuple[np.ndarray, np.ndarray]:
        x = as_point(x)
        values = np.empty(self.m + 1)
        grads = np.empty((self.m + 1, self.dim))
        values[0] = self.workspace.value(x)
        grads[0] = self.workspace.gradient(x)
        for i, ob in enumerate(self.obstacles, start=1):
            values[i] = ob.value(x)
            grads[i] = ob.gradient(x)
        return values, grads

    def beta(self, x: Any) -> float:
        values, _ = self.factors(x)
        return float(np.prod(values))

    def beta_gradient(self, x: Any) -> np.ndarray:
        values, grads = self.factors(x)
        return product_with_gradient(values, grads)[1]

    def beta_and_gradient(self, x: Any) -> Tuple[float, np.ndarray]:
        values, grads = self.factors(x)
        total, grad = product_with_gradient(values, grads)
        return float(total), grad

    def in_free_space(self, x: Any) -> bool:
        """Membership test per factor: inside the shell and outside every open obstacle."""
        values, _ = self.factors(x)
        tol = self.boundary_tolerances()
        return bool(np.all(values >= -tol))

    def in_interior(self, x: Any) -> bool:
        values, _ = self.factors(x)
        return bool(np.all(values > self.boundary_tolerances()))

    def collided(self, x: Any) -> bool:
        values, _ = self.factors(x)
        return bool(np.any(values <= 0))

    def boundary_tolerances(self) -> np.ndarray:
        scales = [self.workspace.value_scale] + [o.value_scale for o in self.obstacles]
        return BOUNDARY_TOL * np.asarray(scales)

    def probes(self, x: Any) -> List[Projection]:
        """Closest boundary point of the shell (index 0) and of every obstacle."""
        x = as_point(x)
        return [self.workspace.probe(x)] + [o.probe(x) for o in self.obstacles]

    def clearance(self, x: Any) -> float:
        return min(p.distance for p in self.probes(x))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "workspace": self.workspace.to_dict(),
            "obstacles": [o.to_dict() for o in self.obstacles],
            "objective": self.objective.to_dict(),
        }


def beta_product(world: World, x: Any) -> float:
    return world.beta(x)


def beta_product_gradient(world: World, x: Any) -> np.ndarray:
    return world.beta_gradient(x)


@dataclass
class ValidationReport:
    passed: bool
    issues: List[str] = field(default_factory=list)
    pair_margins: Dict[Tuple[int, int], float] = field(default_factory=dict)
    workspace_margins: Dict[int, float] = field(default_factory=dict)
    minimum_margin: float = math.inf
    xstar_beta: float = 0.0
    xstar_value: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "issues": list(self.issues),
            "pair_margins": {f"{i}-{j}": v for (i, j), v in sorted(self.pair_margins.items())},
            "workspace_margins": {str(i): v for i, v in sorted(self.workspace_margins.items())},
            "minimum_margin": self.minimum_margin,
            "xstar_beta": self.xstar_beta,
            "xstar_value": self.xstar_value,
        }


def validate_world(world: World, samples: int = DEFAULT_BOUNDARY_SAMPLES) -> ValidationReport:
    """Check that obstacles are disjoint, inside the workspace, and that x* is free.

    Works on boundary samples: a pair intersects when a boundary sample of one
    obstacle is inside or on the other. Margins are sampled boundary gaps.
    """
    if samples < 1000:
        raise ValueError(f"validate_world needs at least 1000 boundary samples, got {samples}")
    report = ValidationReport(passed=True)
    boundaries = [o.boundary_points(samples) for o in world.obstacles]

    for i, (ob, pts) in enumerate(zip(world.obstacles, boundaries), start=1):
        shell = np.array([world.workspace.value(p) for p in pts])
        margin = float(np.min(world.workspace.radius - np.linalg.norm(pts - world.workspace.center, axis=1)))
        report.workspace_margins[i] = margin
        if np.any(shell <= 0):
            report.issues.append(f"obstacle {i} is not inside the workspace interior")

    for i in range(1, world.m + 1):
        for j in range(i + 1, world.m + 1):
            oi, oj = world.obstacle(i), world.obstacle(j)
            pi, pj = boundaries[i - 1], boundaries[j - 1]
            intersect = any(oj.value(p) <= 0 for p in pi) or any(oi.value(p) <= 0 for p in pj)
            gap = float(np.min(cKDTree(pj).query(pi)[0]))
            report.pair_margins[(i, j)] = -gap if intersect else gap
            if intersect:
                report.issues.append(f"obstacles intersect: {i} and {j}")

    margins = list(report.pair_margins.values()) + list(report.workspace_margins.values())
    report.minimum_margin = min(margins) if margins else math.inf

    xstar = world.objective.minimizer
    report.xstar_beta = world.beta(xstar)
    report.xstar_value = world.objective.value(xstar)
    if not world.in_interior(xstar) or not report.xstar_beta > 0:
        report.issues.append("x* is not in the interior of the free space")
    if report.xstar_value < 0:
        report.issues.append("f0(x*) is negative")

    report.passed = not report.issues
    for issue in report.issues:
        logger.info("world %s: %s", world.name, issue)
    return report


def sample_free_space(
    world: World,
    count: int,
    rng: np.random.Generator,
    clearance: float = 0.0,
    box: Optional[float] = None,
    max_tries: int = 1000,
) -> np.ndarray:
    """Rejection-sample interior points with at least `clearance` to every boundary.

    Candidates are uniform over the cube of half-width `box` (the workspace
    radius by default) around the workspace center.
    """
    half = world.workspace.radius if box is None else float(box)
    points: List[np.ndarray] = []
    tries = 0
    while len(points) < count:
        if tries >= max_tries * max(count, 1):
            raise InvariantViolation(f"could not sample {count} free points with clearance {clearance}")
        tries += 1
        x = world.workspace.center + rng.uniform(-half, half, size=world.dim)
        if not world.in_interior(x):
            continue
        if clearance > 0 and world.clearance(x) < clearance:
            continue
        points.append(x)
    return np.array(points).reshape(count, world.dim)
