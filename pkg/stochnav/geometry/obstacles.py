from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, ClassVar, Dict, Protocol, Tuple, runtime_checkable

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .. import DEFAULT_EGG_HESSIAN_SAMPLES
from ..errors import CollisionQueryError, InvariantViolation, ProjectionError

logger = logging.getLogger(__name__)

PROJECTION_MAX_ITER = 100
PROJECTION_TOL = 1e-10
# |beta_i| <= BOUNDARY_TOL * value_scale counts as boundary
BOUNDARY_TOL = 1e-9
SYMMETRY_TOL = 1e-12


def as_point(x: Any) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1)


def unit_directions(count: int, dim: int) -> np.ndarray:
    """Deterministic directions on the unit sphere.

    Planar directions are evenly spaced starting at angle 0, so that axis
    points are always part of the sample.
    """
    if dim == 2:
        theta = 2.0 * math.pi * np.arange(count) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    rng = np.random.default_rng(0)
    dirs = rng.standard_normal((count, dim))
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


@dataclass(frozen=True)
class Projection:
    """Closest boundary point of a set, seen from an outside point."""

    point: np.ndarray
    distance: float
    normal: np.ndarray


@dataclass(frozen=True, eq=False)
class EllipseModel:
    """Ellipse (x-c)^T A (x-c) - r^2 used to hallucinate an obstacle."""

    center: np.ndarray
    matrix: np.ndarray
    radius: float

    def value(self, x: Any) -> float:
        y = as_point(x) - self.center
        return float(y @ self.matrix @ y - self.radius ** 2)

    def gradient(self, x: Any) -> np.ndarray:
        return 2.0 * self.matrix @ (as_point(x) - self.center)


@runtime_checkable
class Obstacle(Protocol):
    kind: ClassVar[str]

    @property
    def dim(self) -> int:
        ...

    @property
    def anchor(self) -> np.ndarray:
        ...

    @property
    def scale(self) -> float:
        ...

    @property
    def value_scale(self) -> float:
        ...

    @property
    def mu_min(self) -> float:
        ...

    def value(self, x: Any) -> float:
        ...

    def gradient(self, x: Any) -> np.ndarray:
        ...

    def hessian(self, x: Any) -> np.ndarray:
        ...

    def hessian_min_eigenvalue(self, x: Any) -> float:
        ...

    def project(self, x: Any) -> Projection:
        ...

    def probe(self, x: Any) -> Projection:
        ...

    def boundary_points(self, count: int) -> np.ndarray:
        ...

    def ellipse_model(self) -> EllipseModel:
        ...

    def to_dict(self) -> Dict[str, Any]:
        ...


class ConvexObstacle:
    """Shared behaviour of the closed-form obstacles.

    Subclasses provide value/gradient/hessian, an interior anchor point,
    boundary sampling and the closest-point solve `_project`.
    """

    kind: ClassVar[str] = ""

    @property
    def dim(self) -> int:
        return int(self.anchor.size)

    def is_on_boundary(self, x: Any) -> bool:
        return abs(self.value(x)) <= BOUNDARY_TOL * self.value_scale

    def is_outside(self, x: Any) -> bool:
        return self.value(x) > BOUNDARY_TOL * self.value_scale

    def hessian_min_eigenvalue(self, x: Any) -> float:
        return float(np.linalg.eigvalsh(self.hessian(x))[0])

    def project(self, x: Any) -> Projection:
        x = as_point(x)
        if not self.is_outside(x):
            raise CollisionQueryError(f"collision query: point {x.tolist()} is not outside the {self.kind}")
        return self._project(x)

    def probe(self, x: Any) -> Projection:
        """Like `project`, but boundary points map to themselves with distance 0."""
        x = as_point(x)
        if self.is_on_boundary(x):
            g = self.gradient(x)
            norm = float(np.linalg.norm(g))
            normal = g / norm if norm > 0 else (x - self.anchor) / float(np.linalg.norm(x - self.anchor))
            return Projection(point=x.copy(), distance=0.0, normal=normal)
        return self.project(x)

    def _project(self, x: np.ndarray) -> Projection:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class SphereObstacle(ConvexObstacle):
    center: np.ndarray
    radius: float

    kind: ClassVar[str] = "sphere"

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", as_point(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise InvariantViolation(f"sphere radius must be positive, got {self.radius}")

    @property
    def anchor(self) -> np.ndarray:
        return self.center

    @property
    def scale(self) -> float:
        return self.radius

    @property
    def value_scale(self) -> float:
        return self.radius ** 2

    @property
    def mu_min(self) -> float:
        return 2.0

    def value(self, x: Any) -> float:
        y = as_point(x) - self.center
        return float(y @ y - self.radius ** 2)

    def gradient(self, x: Any) -> np.ndarray:
        return 2.0 * (as_point(x) - self.center)

    def hessian(self, x: Any) -> np.ndarray:
        return 2.0 * np.eye(self.dim)

    def hessian_min_eigenvalue(self, x: Any) -> float:
        return 2.0

    def _project(self, x: np.ndarray) -> Projection:
        y = x - self.center
        rho = float(np.linalg.norm(y))
        normal = y / rho
        return Projection(point=self.center + self.radius * normal, distance=rho - self.radius, normal=normal)

    def boundary_points(self, count: int) -> np.ndarray:
        return self.center + self.radius * unit_directions(count, self.dim)

    def ellipse_model(self) -> EllipseModel:
        return EllipseModel(center=self.center, matrix=np.eye(self.dim), radius=self.radius)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SphereObstacle":
        return cls(center=data["center"], radius=data["radius"])


@dataclass(frozen=True, eq=False)
class EllipseObstacle(ConvexObstacle):
    """beta(x) = (x-c)^T A (x-c) - lambda_min(A) r^2; r is the largest semi-axis."""

    center: np.ndarray
    matrix: np.ndarray
    radius: float

    kind: ClassVar[str] = "ellipse"

    def __post_init__(self) -> None:
        center = as_point(self.center)
        matrix = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "radius", float(self.radius))
        if matrix.shape != (center.size, center.size):
            raise InvariantViolation(f"ellipse matrix shape {matrix.shape} does not match dimension {center.size}")
        if np.max(np.abs(matrix - matrix.T)) > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(matrix)))):
            raise InvariantViolation("ellipse matrix is not symmetric")
        if not self._eigh[0][0] > 0:
            raise InvariantViolation("ellipse matrix is not positive definite")
        if not self.radius > 0:
            raise InvariantViolation(f"ellipse scale must be positive, got {self.radius}")

    @cached_property
    def _eigh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.matrix)

    @property
    def level(self) -> float:
        return float(self._eigh[0][0]) * self.radius ** 2

    @property
    def anchor(self) -> np.ndarray:
        return self.center

    @property
    def scale(self) -> float:
        return self.radius

    @property
    def value_scale(self) -> float:
        return self.level

    @property
    def mu_min(self) -> float:
        return 2.0 * float(self._eigh[0][0])

    def value(self, x: Any) -> float:
        y = as_point(x) - self.center
        return float(y @ self.matrix @ y - self.level)

    def gradient(self, x: Any) -> np.ndarray:
        return 2.0 * self.matrix @ (as_point(x) - self.center)

    def hessian(self, x: Any) -> np.ndarray:
        return 2.0 * self.matrix

    def hessian_min_eigenvalue(self, x: Any) -> float:
        return self.mu_min

    def _project(self, x: np.ndarray) -> Projection:
        # KKT system x - P = t * grad(P) reduced to its multiplier in the eigenbasis
        w, vecs = self._eigh
        y = vecs.T @ (x - self.center)
        level = self.level
        if np.allclose(w, w[0], rtol=0, atol=SYMMETRY_TOL * w[0]):
            z = y * math.sqrt(level / float(w[0] * (y @ y)))
        else:
            t = 0.0
            for it in range(PROJECTION_MAX_ITER):
                q = 1.0 + 2.0 * t * w
                z = y / q
                h = float(np.sum(w * z ** 2)) - level
                logger.debug("ellipse projection iter %d residual %.3e", it, h)
                if abs(h) <= 1e-14 * level:
                    break
                dh = float(np.sum(-4.0 * w ** 2 * y ** 2 / q ** 3))
                if dh == 0.0:
                    break
                t -= h / dh
            residual = abs(float(np.sum(w * z ** 2)) - level) / level
            if residual > PROJECTION_TOL:
                raise ProjectionError("ellipse projection did not converge", residual)
        p = self.center + vecs @ z
        d = float(np.linalg.norm(x - p))
        return Projection(point=p, distance=d, normal=(x - p) / d)

    def boundary_points(self, count: int) -> np.ndarray:
        w, vecs = self._eigh
        u = unit_directions(count, self.dim)
        return self.center + (u * np.sqrt(self.level / w)) @ vecs.T

    def ellipse_model(self) -> EllipseModel:
        return EllipseModel(center=self.center, matrix=self.matrix, radius=math.sqrt(self.level))

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "center": self.center.tolist(), "A": self.matrix.tolist(), "r": self.radius}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EllipseObstacle":
        return cls(center=data["center"], matrix=data["A"], radius=data["r"])


EGG_AXES = ("horizontal", "vertical")
# polar samples that pick the basin of the closest point
EGG_PROJECTION_GRID = 512


@dataclass(frozen=True, eq=False)
class EggObstacle(ConvexObstacle):
    """Planar egg: beta(x) = |x-c|^4 - 2r (x_a - c_a)^3 along the egg axis a.

    The bottom of the egg sits at `center` and the tip at `center + 2r e_a`.
    Only the exterior is ever evaluated; no convex extension inside is built.
    """

    center: np.ndarray
    tip: float
    axis: str = "horizontal"

    kind: ClassVar[str] = "egg"

    def __post_init__(self) -> None:
        center = as_point(self.center)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "tip", float(self.tip))
        if center.size != 2:
            raise InvariantViolation("egg obstacles are planar")
        if self.axis not in EGG_AXES:
            raise InvariantViolation(f"egg axis must be one of {EGG_AXES}, got {self.axis!r}")
        if not self.tip > 0:
            raise InvariantViolation(f"egg tip distance must be positive, got {self.tip}")

    @property
    def axis_vector(self) -> np.ndarray:
        return np.array([1.0, 0.0]) if self.axis == "horizontal" else np.array([0.0, 1.0])

    @property
    def _side_vector(self) -> np.ndarray:
        return np.array([0.0, 1.0]) if self.axis == "horizontal" else np.array([-1.0, 0.0])

    @property
    def anchor(self) -> np.ndarray:
        return self.center + self.tip * self.axis_vector

    @property
    def scale(self) -> float:
        return self.tip

    @property
    def value_scale(self) -> float:
        return self.tip ** 4

    def value(self, x: Any) -> float:
        y = as_point(x) - self.center
        s = float(y @ y)
        u = float(y @ self.axis_vector)
        return s * s - 2.0 * self.tip * u ** 3

    def gradient(self, x: Any) -> np.ndarray:
        y = as_point(x) - self.center
        s = float(y @ y)
        u = float(y @ self.axis_vector)
        return 4.0 * s * y - 6.0 * self.tip * u ** 2 * self.axis_vector

    def hessian(self, x: Any) -> np.ndarray:
        y = as_point(x) - self.center
        s = float(y @ y)
        u = float(y @ self.axis_vector)
        e = self.axis_vector
        return 4.0 * s * np.eye(2) + 8.0 * np.outer(y, y) - 12.0 * self.tip * u * np.outer(e, e)

    def hessian_min_eigenvalue(self, x: Any) -> float:
        """Hessian of beta restricted to the tangent of its level curve through x.

        The full Hessian of the quartic is indefinite on parts of the boundary;
        the tangential form is what carries the convexity of the egg.
        """
        g = self.gradient(x)
        norm = float(np.linalg.norm(g))
        if norm == 0.0:
            return 0.0
        t = np.array([-g[1], g[0]]) / norm
        value = float(t @ self.hessian(x) @ t)
        if value < -BOUNDARY_TOL * self.tip ** 2:
            raise InvariantViolation(f"egg level curve is not convex at {as_point(x).tolist()} ({value:.3e})")
        return value

    @cached_property
    def mu_min(self) -> float:
        points = self.boundary_points(DEFAULT_EGG_HESSIAN_SAMPLES)
        return min(self.hessian_min_eigenvalue(p) for p in points)

    def boundary_points(self, count: int) -> np.ndarray:
        # open interval: the bottom point (theta = +-pi/2) is a singular point of beta
        theta = -0.5 * math.pi + math.pi * (np.arange(count) + 0.5) / count
        rho = 2.0 * self.tip * np.cos(theta) ** 3
        return (
            self.center
            + (rho * np.cos(theta))[:, None] * self.axis_vector
            + (rho * np.sin(theta))[:, None] * self._side_vector
        )

    def _polar(self, theta: float) -> Tuple[float, float, float, float]:
        """Boundary point (u, v) at polar angle theta in axis/side coordinates, and its theta-derivative."""
        c, s = math.cos(theta), math.sin(theta)
        r2 = 2.0 * self.tip
        return r2 * c ** 4, r2 * c ** 3 * s, -4.0 * r2 * c ** 3 * s, r2 * c * c * (c * c - 3.0 * s * s)

    def _project(self, x: np.ndarray) -> Projection:
        """Closest point on rho(theta) = 2r cos^3(theta), theta in [-pi/2, pi/2].

        Both ends of the interval are the bottom point `center`, where grad beta
        vanishes and the boundary curvature is unbounded; it is compared
        explicitly. Elsewhere a grid picks the basin and the stationarity
        condition is solved with brentq.
        """
        y = x - self.center
        u, v = float(y @ self.axis_vector), float(y @ self._side_vector)

        def squared(theta: float) -> float:
            pu, pv, _, _ = self._polar(theta)
            return (pu - u) ** 2 + (pv - v) ** 2

        def slope(theta: float) -> float:
            pu, pv, du, dv = self._polar(theta)
            return (pu - u) * du + (pv - v) * dv

        thetas = np.linspace(-0.5 * math.pi, 0.5 * math.pi, EGG_PROJECTION_GRID + 1)
        j = int(np.argmin([squared(t) for t in thetas]))
        lo, hi = float(thetas[max(j - 1, 0)]), float(thetas[min(j + 1, EGG_PROJECTION_GRID)])
        if slope(lo) < 0.0 < slope(hi):
            theta = brentq(slope, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        else:
            theta = float(minimize_scalar(squared, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12}).x)
        best = squared(theta)
        if best >= u * u + v * v:
            p = self.center.copy()
        else:
            pu, pv, _, _ = self._polar(theta)
            p = self.center + pu * self.axis_vector + pv * self._side_vector
        d = float(np.linalg.norm(x - p))
        return Projection(point=p, distance=d, normal=(x - p) / d)

    def ellipse_model(self) -> EllipseModel:
        return self._moment_model

    @cached_property
    def _moment_model(self) -> EllipseModel:
        """Moment fit: an ellipse whose boundary samples share the egg's mean and covariance."""
        points = self.boundary_points(4096)
        mean = points.mean(axis=0)
        cov = np.cov(points.T, bias=True)
        matrix = 0.5 * np.linalg.inv(cov)
        return EllipseModel(center=mean, matrix=0.5 * (matrix + matrix.T), radius=1.0)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "center": self.center.tolist(), "r": self.tip, "axis": self.axis}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EggObstacle":
        return cls(center=data["center"], tip=data["r"], axis=data.get("axis", "horizontal"))


OBSTACLE_KINDS = {
    SphereObstacle.kind: SphereObstacle,
    EllipseObstacle.kind: EllipseObstacle,
    EggObstacle.kind: EggObstacle,
}


def obstacle_value(obstacle: Obstacle, x: Any) -> float:
    return obstacle.value(x)


def obstacle_gradient(obstacle: Obstacle, x: Any) -> np.ndarray:
    return obstacle.gradient(x)


def obstacle_hessian_min_eigenvalue(obstacle: Obstacle, x: Any) -> float:
    if isinstance(obstacle, EggObstacle) and not obstacle.value(x) >= -BOUNDARY_TOL * obstacle.value_scale:
        raise CollisionQueryError("egg Hessian is only defined outside the obstacle")
    return obstacle.hessian_min_eigenvalue(x)


def project_to_obstacle(obstacle: Obstacle, x: Any) -> Projection:
    return obstacle.project(x)


def boundary_curvature_radius(obstacle: Obstacle, point: Any) -> float:
    """Radius of curvature of a planar obstacle boundary at `point`.

    Reciprocal of the implicit-curve curvature
    (b_y^2 b_xx - 2 b_x b_y b_xy + b_x^2 b_yy) / |grad b|^3.
    """
    p = as_point(point)
    if p.size != 2:
        raise InvariantViolation("boundary curvature is only defined for planar obstacles")
    if isinstance(obstacle, SphereObstacle):
        return obstacle.radius
    g = obstacle.gradient(p)
    if isinstance(obstacle, EggObstacle) and not np.any(g):
        # bottom point: unbounded curvature
        return 0.0
    h = obstacle.hessian(p)
    bx, by = float(g[0]), float(g[1])
    denom = by * by * h[0, 0] - 2.0 * bx * by * h[0, 1] + bx * bx * h[1, 1]
    if not denom > 0:
        raise InvariantViolation(f"non-positive boundary curvature at {p.tolist()}")
    return float(math.hypot(bx, by) ** 3 / denom)
