"""Random world generators for the elliptical and egg-shaped experiment families."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import ortho_group

from ..errors import ConfigError, InfeasibleParametersError
from ..geometry.obstacles import EggObstacle, EllipseObstacle, Obstacle
from ..geometry.world import QuadraticObjective, WorkspaceSphere, World, sample_free_space, validate_world
from ..potentials.condition import check_condition

logger = logging.getLogger(__name__)

ORTHANT_SIGNS = ((1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0))
PRESCREEN_SAMPLES = 128
Q_REDRAWS = 1000
# start clearance and sampling box, as fractions of r0
START_CLEARANCE = 1e-2
START_BOX = 1.0


def _check_range(name: str, bounds: Tuple[float, float]) -> Tuple[float, float]:
    lo, hi = (float(b) for b in bounds)
    if not 0 < lo <= hi:
        raise ConfigError(f"expected 0 < low <= high, got [{lo}, {hi}]", field=name)
    return lo, hi


@dataclass(frozen=True)
class EllipticalWorldParams:
    c0: Tuple[float, float] = (0.0, 0.0)
    r0: float = 20.0
    L: float = 6.0
    delta: float = 1.0
    eigen_range: Tuple[float, float] = (1.0, 2.0)
    # None means [r0/10, r0/5]
    radius_range: Optional[Tuple[float, float]] = None
    # upper end of the Q eigenvalue draw is min(N_cond, cap) + 1
    condition_cap: float = 4.0
    seed: int = 0
    max_rejections: int = 1000

    def __post_init__(self) -> None:
        if not self.r0 > 0:
            raise ConfigError(f"r0 must be positive, got {self.r0}", field="r0")
        if not 0 < self.delta < self.L:
            raise ConfigError(f"need 0 < delta < L, got delta={self.delta} L={self.L}", field="delta")
        _check_range("eigen_range", self.eigen_range)
        _check_range("radius_range", self.radii)
        if not self.condition_cap >= 1:
            raise ConfigError(f"condition_cap must be at least 1, got {self.condition_cap}", field="condition_cap")
        if self.max_rejections < 1:
            raise ConfigError("max_rejections must be positive", field="max_rejections")

    @property
    def radii(self) -> Tuple[float, float]:
        return tuple(self.radius_range) if self.radius_range is not None else (self.r0 / 10, self.r0 / 5)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["c0"] = list(self.c0)
        data["eigen_range"] = list(self.eigen_range)
        data["radius_range"] = list(self.radii)
        return data


@dataclass(frozen=True)
class EggWorldParams:
    c0: Tuple[float, float] = (0.0, 0.0)
    r0: float = 20.0
    L: float = 6.0
    m: int = 4
    radius_range: Optional[Tuple[float, float]] = None
    horizontal_probability: float = 0.5
    condition_cap: float = 4.0
    seed: int = 0
    max_rejections: int = 1000

    def __post_init__(self) -> None:
        if not self.r0 > 0:
            raise ConfigError(f"r0 must be positive, got {self.r0}", field="r0")
        if not self.L > 0:
            raise ConfigError(f"L must be positive, got {self.L}", field="L")
        if self.m < 1:
            raise ConfigError(f"egg worlds need at least one obstacle, got {self.m}", field="m")
        if not 0 <= self.horizontal_probability <= 1:
            raise ConfigError("horizontal_probability must be in [0, 1]", field="horizontal_probability")
        _check_range("radius_range", self.radii)
        if not self.condition_cap >= 1:
            raise ConfigError(f"condition_cap must be at least 1, got {self.condition_cap}", field="condition_cap")
        if self.max_rejections < 1:
            raise ConfigError("max_rejections must be positive", field="max_rejections")

    @property
    def radii(self) -> Tuple[float, float]:
        return tuple(self.radius_range) if self.radius_range is not None else (self.r0 / 10, self.r0 / 5)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["c0"] = list(self.c0)
        data["radius_range"] = list(self.radii)
        return data


def random_rotation(rng: np.random.Generator, dim: int = 2) -> np.ndarray:
    return ortho_group.rvs(dim=dim, random_state=rng)


def _disjoint(workspace: WorkspaceSphere, obstacles: Sequence[Obstacle], samples: int) -> bool:
    """Cheap boundary-sample screen run before the full validation."""
    boundaries = [o.boundary_points(samples) for o in obstacles]
    for pts in boundaries:
        if np.any(np.linalg.norm(pts - workspace.center, axis=1) >= workspace.radius):
            return False
    for i, oi in enumerate(obstacles):
        for j in range(i + 1, len(obstacles)):
            oj = obstacles[j]
            if any(oj.value(p) <= 0 for p in boundaries[i]) or any(oi.value(p) <= 0 for p in boundaries[j]):
                return False
    return True


def _draw_ellipses(params: EllipticalWorldParams, rng: np.random.Generator) -> List[EllipseObstacle]:
    lo, hi = params.radii
    obstacles = []
    for signs in ORTHANT_SIGNS:
        center = np.asarray(params.c0) + params.L * np.asarray(signs) + rng.uniform(-params.delta, params.delta, size=2)
        rotation = random_rotation(rng)
        eig = rng.uniform(*params.eigen_range, size=2)
        matrix = rotation @ np.diag(eig) @ rotation.T
        obstacles.append(EllipseObstacle(center=center, matrix=0.5 * (matrix + matrix.T), radius=rng.uniform(lo, hi)))
    return obstacles


def _draw_objective_matrix(n_cond: float, cap: float, rng: np.random.Generator) -> Optional[np.ndarray]:
    """Q with eigenvalues from [1, min(N_cond, cap) + 1], redrawn until its condition number is below N_cond."""
    top = min(n_cond, cap) + 1.0
    for _ in range(Q_REDRAWS):
        eig = rng.uniform(1.0, top, size=2)
        if eig.max() / eig.min() < n_cond:
            rotation = random_rotation(rng)
            q = rotation @ np.diag(eig) @ rotation.T
            return 0.5 * (q + q.T)
    return None


def egg_objective_matrix(n_cond: float, cap: float, rng: np.random.Generator) -> np.ndarray:
    """Q drawn as for elliptical worlds when N_cond leaves room, else isotropic with eigenvalue in [1, 2]."""
    q = _draw_objective_matrix(n_cond, cap, rng) if n_cond > 1 else None
    if q is None:
        return rng.uniform(1.0, 2.0) * np.eye(2)
    return q


def generate_elliptical_world(params: EllipticalWorldParams) -> World:
    """Four ellipses, one per quadrant around L(+-1, +-1), with an objective that meets the condition.

    Everything is redrawn when obstacles intersect, when x* is not free, or
    when no objective matrix satisfies the navigation-function condition.
    """
    rng = np.random.default_rng(params.seed)
    workspace = WorkspaceSphere(center=np.asarray(params.c0, dtype=float), radius=params.r0)
    for attempt in range(1, params.max_rejections + 1):
        obstacles = _draw_ellipses(params, rng)
        xstar = np.asarray(params.c0) + rng.uniform(-params.r0 / 2, params.r0 / 2, size=2)
        if not _disjoint(workspace, obstacles, PRESCREEN_SAMPLES):
            continue
        probe = World(workspace, tuple(obstacles), QuadraticObjective(xstar, np.eye(2)), name=f"elliptical-{params.seed}")
        if not probe.in_interior(xstar):
            continue
        n_cond = check_condition(probe).n_cond
        if not n_cond > 1:
            logger.debug("attempt %d: admissible condition number %.4g leaves no room for Q", attempt, n_cond)
            continue
        q = _draw_objective_matrix(n_cond, params.condition_cap, rng)
        if q is None:
            continue
        world = World(workspace, tuple(obstacles), QuadraticObjective(xstar, q), name=probe.name)
        if not validate_world(world).passed or not check_condition(world).passed:
            continue
        logger.info(
            "generated %s after %d attempt(s): N_cond %.4g, condition number %.4g",
            world.name,
            attempt,
            n_cond,
            world.objective.condition_number,
        )
        return world
    raise InfeasibleParametersError(f"parameters infeasible: {params.max_rejections} consecutive rejections")


def generate_egg_world(params: EggWorldParams) -> World:
    """m eggs with centers uniform in [-L/2, L/2]^2, each horizontal or vertical at random.

    N_cond comes from the sampled boundary Hessian minima. The egg curvature
    vanishes towards the bottom point, so it is often at most 1; Q is then
    isotropic.
    """
    rng = np.random.default_rng(params.seed)
    workspace = WorkspaceSphere(center=np.asarray(params.c0, dtype=float), radius=params.r0)
    lo, hi = params.radii
    for attempt in range(1, params.max_rejections + 1):
        obstacles = []
        for _ in range(params.m):
            center = np.asarray(params.c0) + rng.uniform(-params.L / 2, params.L / 2, size=2)
            axis = "horizontal" if rng.random() < params.horizontal_probability else "vertical"
            obstacles.append(EggObstacle(center=center, tip=rng.uniform(lo, hi), axis=axis))
        xstar = np.asarray(params.c0) + rng.uniform(-params.r0 / 2, params.r0 / 2, size=2)
        if not _disjoint(workspace, obstacles, PRESCREEN_SAMPLES):
            continue
        probe = World(workspace, tuple(obstacles), QuadraticObjective(xstar, np.eye(2)), name=f"egg-{params.seed}")
        if not probe.in_interior(xstar):
            continue
        n_cond = check_condition(probe).n_cond
        q = egg_objective_matrix(n_cond, params.condition_cap, rng)
        world = World(workspace, tuple(obstacles), QuadraticObjective(xstar, q), name=probe.name)
        if not validate_world(world).passed:
            continue
        logger.info(
            "generated %s after %d attempt(s): %d horizontal, %d vertical, N_cond %.4g, condition number %.4g",
            world.name,
            attempt,
            sum(o.axis == "horizontal" for o in obstacles),
            sum(o.axis == "vertical" for o in obstacles),
            n_cond,
            world.objective.condition_number,
        )
        return world
    raise InfeasibleParametersError(f"parameters infeasible: {params.max_rejections} consecutive rejections")


def sample_start_positions(world: World, count: int, seed: int, clearance: Optional[float] = None) -> np.ndarray:
    """Starts uniform over [-r0, r0]^2 around the workspace center, rejected into the free interior."""
    if count < 0:
        raise ValueError(f"start count must be nonnegative, got {count}")
    r0 = world.workspace.radius
    clearance = START_CLEARANCE * r0 if clearance is None else float(clearance)
    return sample_free_space(world, count, np.random.default_rng(seed), clearance=clearance, box=START_BOX * r0)
