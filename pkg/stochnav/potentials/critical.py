from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from ..errors import InfeasibleParametersError, InvariantViolation
from ..geometry.obstacles import as_point
from ..geometry.world import World
from .potential import ArtificialPotential, PotentialSpec, make_potential, relative_residual

logger = logging.getLogger(__name__)

NEWTON_MAX_ITER = 100
NEWTON_TOL = 1e-10
NEWTON_ACCEPT = 1e-6
JACOBIAN_STEP = 1e-6        # times the world length scale
DEDUPE_RADIUS = 1e-6        # times the world length scale
DEGENERACY_RATIO = 1e-8
SEED_GRID = 20
FAR_SEED_FACTOR = 1.05
GOAL_SNAP = 1e-12          # times the world length scale


class CriticalKind(str, Enum):
    MINIMUM = "minimum"
    SADDLE = "saddle"
    MAXIMUM = "maximum"
    DEGENERATE = "degenerate"


@dataclass
class CriticalPoint:
    point: np.ndarray
    kind: CriticalKind
    eigenvalues: np.ndarray
    beta: float
    residual: float
    unstable_direction: Optional[np.ndarray] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "point": self.point.tolist(),
            "kind": self.kind.value,
            "eigenvalues": self.eigenvalues.tolist(),
            "beta": self.beta,
            "residual": self.residual,
        }


@dataclass
class CriticalPointReport:
    k: float
    points: List[CriticalPoint] = field(default_factory=list)
    # (seed, reason) for every seed whose Newton run was not accepted
    skipped: List[Tuple[np.ndarray, str]] = field(default_factory=list)
    obstacle_count: int = 0

    def of_kind(self, kind: CriticalKind) -> List[CriticalPoint]:
        return [p for p in self.points if p.kind is kind]

    @property
    def minima(self) -> List[CriticalPoint]:
        return self.of_kind(CriticalKind.MINIMUM)

    @property
    def saddles(self) -> List[CriticalPoint]:
        return self.of_kind(CriticalKind.SADDLE)

    @property
    def degenerate(self) -> List[CriticalPoint]:
        return self.of_kind(CriticalKind.DEGENERATE)

    @property
    def is_navigation(self) -> bool:
        """One minimum, one nondegenerate saddle per obstacle and nothing else."""
        return (
            len(self.minima) == 1
            and len(self.saddles) == self.obstacle_count
            and len(self.points) == 1 + self.obstacle_count
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "is_navigation": self.is_navigation,
            "minima": len(self.minima),
            "saddles": len(self.saddles),
            "degenerate": len(self.degenerate),
            "points": [p.to_dict() for p in self.points],
            "skipped_seeds": len(self.skipped),
        }


def finite_difference_jacobian(fn: Callable[[np.ndarray], np.ndarray], x: Any, step: float) -> np.ndarray:
    """Central differences; column j is d fn / d x_j."""
    x = as_point(x)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        cols.append((fn(x + e) - fn(x - e)) / (2.0 * step))
    return np.stack(cols, axis=1)


def direction_jacobian(world: World, spec: PotentialSpec, x: Any, symmetric: bool = True) -> np.ndarray:
    """Jacobian of the descent direction; at a critical point a positive multiple of the Hessian of phi."""
    potential = make_potential(world, spec)
    jac = finite_difference_jacobian(potential.direction, x, JACOBIAN_STEP * world.length_scale)
    return 0.5 * (jac + jac.T) if symmetric else jac


def classify(eigenvalues: np.ndarray) -> CriticalKind:
    scale = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    if scale == 0.0 or np.any(np.abs(eigenvalues) < DEGENERACY_RATIO * scale):
        return CriticalKind.DEGENERATE
    if np.all(eigenvalues > 0):
        return CriticalKind.MINIMUM
    if np.all(eigenvalues < 0):
        return CriticalKind.MAXIMUM
    return CriticalKind.SADDLE


def _residual(potential: ArtificialPotential, world: World, x: np.ndarray) -> float:
    """Relative residual; both terms vanish together at the goal of a zero-offset objective."""
    objective = world.objective
    if objective.offset == 0.0 and np.linalg.norm(x - objective.minimizer) <= GOAL_SNAP * world.length_scale:
        return 0.0
    return relative_residual(potential, x)


def _newton(potential: ArtificialPotential, world: World, x0: np.ndarray) -> Tuple[np.ndarray, float, str]:
    """Damped Newton on direction(x) = 0 that never leaves the interior of the free space."""
    step = JACOBIAN_STEP * world.length_scale
    max_move = 0.25 * world.length_scale
    x = x0
    g = potential.direction(x)
    for it in range(NEWTON_MAX_ITER):
        residual = _residual(potential, world, x)
        logger.debug("newton iter %d residual %.3e at %s", it, residual, x.tolist())
        if residual <= NEWTON_TOL:
            return x, residual, ""
        jac = finite_difference_jacobian(potential.direction, x, step)
        try:
            dx = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(jac, -g, rcond=None)[0]
        norm = float(np.linalg.norm(dx))
        if not math.isfinite(norm):
            return x, residual, "non-finite Newton step"
        if norm > max_move:
            dx *= max_move / norm
        gnorm = float(np.linalg.norm(g))
        lam = 1.0
        while lam > 1e-8:
            candidate = x + lam * dx
            if world.in_interior(candidate):
                g_new = potential.direction(candidate)
                if float(np.linalg.norm(g_new)) < (1.0 - 1e-4 * lam) * gnorm:
                    break
            lam *= 0.5
        else:
            break
        x, g = candidate, g_new
    residual = _residual(potential, world, x)
    if residual <= NEWTON_ACCEPT:
        return x, residual, ""
    return x, residual, f"Newton stalled at residual {residual:.3e}"


def _far_crossing_seed(world: World, index: int) -> Optional[np.ndarray]:
    """Point just behind obstacle `index` on the ray from x* through its anchor."""
    ob = world.obstacle(index)
    xstar = world.objective.minimizer
    offset = ob.anchor - xstar
    dist = float(np.linalg.norm(offset))
    if dist == 0.0:
        return None
    u = offset / dist

    def along(t: float) -> float:
        return ob.value(xstar + t * u)

    if along(dist) >= 0:
        return None
    hi = dist + ob.scale
    while along(hi) < 0:
        hi += ob.scale
        if hi > 4.0 * world.length_scale:
            return None
    t_exit = brentq(along, dist, hi, xtol=1e-12 * world.length_scale)
    return xstar + FAR_SEED_FACTOR * t_exit * u


def default_seeds(world: World, grid: int = SEED_GRID) -> List[np.ndarray]:
    """Seeds behind every obstacle plus a regular grid over the workspace, all in the interior."""
    seeds: List[np.ndarray] = [world.objective.minimizer.copy()]
    for i in range(1, world.m + 1):
        seed = _far_crossing_seed(world, i)
        if seed is not None:
            seeds.append(seed)
    per_axis = grid if world.dim == 2 else max(3, int(round(grid ** (2.0 / world.dim))))
    c, r = world.workspace.center, world.workspace.radius
    axes = [np.linspace(c[j] - r, c[j] + r, per_axis + 2)[1:-1] for j in range(world.dim)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, world.dim)
    seeds.extend(p for p in mesh)
    return [s for s in seeds if world.in_interior(s)]


def _describe(potential: ArtificialPotential, world: World, x: np.ndarray, residual: float) -> CriticalPoint:
    step = JACOBIAN_STEP * world.length_scale
    jac = finite_difference_jacobian(potential.direction, x, step)
    eigenvalues, vectors = np.linalg.eigh(0.5 * (jac + jac.T))
    kind = classify(eigenvalues)
    return CriticalPoint(
        point=x,
        kind=kind,
        eigenvalues=eigenvalues,
        beta=world.beta(x),
        residual=residual,
        unstable_direction=vectors[:, 0] if kind is CriticalKind.SADDLE else None,
    )


def find_critical_points(
    world: World,
    spec: PotentialSpec,
    seeds: Optional[Iterable[Any]] = None,
) -> CriticalPointReport:
    potential = make_potential(world, spec)
    report = CriticalPointReport(k=spec.k, obstacle_count=world.m)
    radius = DEDUPE_RADIUS * world.length_scale
    seed_list: Sequence[Any] = default_seeds(world) if seeds is None else list(seeds)
    for seed in seed_list:
        seed = as_point(seed)
        if not world.in_interior(seed):
            report.skipped.append((seed, "seed is not in the interior of the free space"))
            continue
        root, residual, failure = _newton(potential, world, seed)
        if failure:
            report.skipped.append((seed, failure))
            continue
        if any(np.linalg.norm(root - p.point) <= radius for p in report.points):
            continue
        report.points.append(_describe(potential, world, root, residual))
    report.points.sort(key=lambda p: (p.kind != CriticalKind.MINIMUM, -p.beta))
    logger.debug(
        "k=%g: %d minima, %d saddles, %d degenerate, %d seeds skipped",
        spec.k, len(report.minima), len(report.saddles), len(report.degenerate), len(report.skipped),
    )
    return report


def locate_minimum(world: World, spec: PotentialSpec) -> np.ndarray:
    """The minimum of phi near x*, found by Newton from x* and by a full seed sweep as a fallback."""
    return _locate_minimum(world, spec).copy()


@functools.lru_cache(maxsize=64)
def _locate_minimum(world: World, spec: PotentialSpec) -> np.ndarray:
    potential = make_potential(world, spec)
    xstar = world.objective.minimizer
    root, residual, failure = _newton(potential, world, xstar)
    if not failure and _describe(potential, world, root, residual).kind is CriticalKind.MINIMUM:
        return root
    minima = find_critical_points(world, spec).minima
    if not minima:
        raise InvariantViolation(f"no minimum of the potential found at k={spec.k}")
    return min(minima, key=lambda p: float(np.linalg.norm(p.point - xstar))).point


@dataclass
class OrderSearch:
    k: Optional[float]
    reports: Dict[float, CriticalPointReport] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"K": self.k, "ladder": {str(k): r.to_dict() for k, r in self.reports.items()}}


def search_order(
    world: World,
    spec: PotentialSpec,
    k_start: float = 2.0,
    k_max: float = 256.0,
    seeds: Optional[Sequence[Any]] = None,
    strict: bool = True,
) -> OrderSearch:
    """Double k until the critical set is one minimum plus one nondegenerate saddle per obstacle."""
    result = OrderSearch(k=None)
    seed_list = default_seeds(world) if seeds is None else list(seeds)
    k = float(k_start)
    while k <= k_max:
        report = find_critical_points(world, spec.with_k(k), seed_list)
        result.reports[k] = report
        if report.is_navigation:
            result.k = k
            logger.info("order search: navigation structure from k=%g", k)
            return result
        k *= 2.0
    if strict:
        raise InfeasibleParametersError(f"no k up to {k_max} yields a navigation function")
    return result
