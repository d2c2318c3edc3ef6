from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, Protocol, Tuple

import numpy as np

from ..errors import InvariantViolation, OutsideFreeSpaceError
from ..geometry.obstacles import as_point
from ..geometry.world import World, product_with_gradient

logger = logging.getLogger(__name__)


class PotentialKind(str, Enum):
    RIMON_KODITSCHEK = "rk"
    LOG_BARRIER = "log"


_KIND_ALIASES = {
    "rk": PotentialKind.RIMON_KODITSCHEK,
    "rimon-koditschek": PotentialKind.RIMON_KODITSCHEK,
    "log": PotentialKind.LOG_BARRIER,
    "log-barrier": PotentialKind.LOG_BARRIER,
}


@dataclass(frozen=True)
class PotentialSpec:
    kind: PotentialKind = PotentialKind.RIMON_KODITSCHEK
    k: float = 7.0

    def __post_init__(self) -> None:
        kind = self.kind
        if not isinstance(kind, PotentialKind):
            try:
                kind = _KIND_ALIASES[str(kind).lower()]
            except KeyError:
                raise InvariantViolation(f"unknown potential kind {self.kind!r}") from None
            object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "k", float(self.k))
        if not self.k > 0:
            raise InvariantViolation(f"order parameter k must be positive, got {self.k}")

    def with_k(self, k: float) -> "PotentialSpec":
        return PotentialSpec(kind=self.kind, k=k)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "k": self.k}


def _log(v: float) -> float:
    return math.log(v) if v > 0 else -math.inf


@dataclass(frozen=True)
class PointState:
    """Objective and obstacle-product quantities at one point."""

    x: np.ndarray
    f0: float
    grad_f0: np.ndarray
    beta: float
    grad_beta: np.ndarray
    free: bool
    interior: bool


def evaluate(world: World, x: Any) -> PointState:
    x = as_point(x)
    values, grads = world.factors(x)
    beta, grad_beta = product_with_gradient(values, grads)
    tol = world.boundary_tolerances()
    return PointState(
        x=x,
        f0=world.objective.value(x),
        grad_f0=world.objective.gradient(x),
        beta=float(beta),
        grad_beta=grad_beta,
        free=bool(np.all(values >= -tol)),
        interior=bool(np.all(values > 0)),
    )


class ArtificialPotential(Protocol):
    """Seam for potentials whose descent direction is a positive multiple of the gradient."""

    world: World
    k: float

    def value(self, x: Any) -> float:
        ...

    def gradient(self, x: Any) -> np.ndarray:
        ...

    def direction(self, x: Any) -> np.ndarray:
        ...

    def direction_terms(self, x: Any) -> Tuple[np.ndarray, np.ndarray]:
        ...

    def log_scale(self, x: Any) -> float:
        ...


class RimonKoditschekPotential:
    """phi_k = f0 / (f0^k + beta)^(1/k), evaluated in log-space for large k."""

    def __init__(self, world: World, k: float) -> None:
        self.world = world
        self.k = float(k)

    def _log_denominator(self, s: PointState) -> float:
        # log(f0^k + beta)
        return float(np.logaddexp(self.k * _log(s.f0), _log(s.beta)))

    def value(self, x: Any) -> float:
        s = evaluate(self.world, x)
        if not s.free:
            raise OutsideFreeSpaceError(f"outside free space: {s.x.tolist()}")
        if s.f0 == 0.0:
            return 0.0
        return math.exp(_log(s.f0) - self._log_denominator(s) / self.k)

    def gradient(self, x: Any) -> np.ndarray:
        s = evaluate(self.world, x)
        if not s.interior:
            raise OutsideFreeSpaceError(f"gradient needs beta > 0, got {s.beta:.3e} at {s.x.tolist()}")
        return math.exp(-self.log_scale_state(s)) * self._direction(s)

    def log_scale_state(self, s: PointState) -> float:
        return (1.0 + 1.0 / self.k) * self._log_denominator(s)

    def log_scale(self, x: Any) -> float:
        """log of (f0^k + beta)^(1+1/k), the factor between direction and gradient."""
        return self.log_scale_state(evaluate(self.world, x))

    def _direction(self, s: PointState) -> np.ndarray:
        return s.beta * s.grad_f0 - (s.f0 / self.k) * s.grad_beta

    def direction(self, x: Any) -> np.ndarray:
        return self._direction(evaluate(self.world, x))

    def direction_terms(self, x: Any) -> Tuple[np.ndarray, np.ndarray]:
        s = evaluate(self.world, x)
        return s.beta * s.grad_f0, (s.f0 / self.k) * s.grad_beta


class LogBarrierPotential:
    """phi_k = f0 - log(beta) / k; unbounded at the free-space boundary."""

    def __init__(self, world: World, k: float) -> None:
        self.world = world
        self.k = float(k)

    def value(self, x: Any) -> float:
        s = evaluate(self.world, x)
        if not s.interior:
            raise OutsideFreeSpaceError(f"outside free space: {s.x.tolist()}")
        return s.f0 - math.log(s.beta) / self.k

    def gradient(self, x: Any) -> np.ndarray:
        s = evaluate(self.world, x)
        if not s.interior:
            raise OutsideFreeSpaceError(f"gradient needs beta > 0, got {s.beta:.3e} at {s.x.tolist()}")
        return s.grad_f0 - s.grad_beta / (self.k * s.beta)

    def log_scale(self, x: Any) -> float:
        return _log(evaluate(self.world, x).beta)

    def direction(self, x: Any) -> np.ndarray:
        s = evaluate(self.world, x)
        return s.beta * s.grad_f0 - s.grad_beta / self.k

    def direction_terms(self, x: Any) -> Tuple[np.ndarray, np.ndarray]:
        s = evaluate(self.world, x)
        return s.beta * s.grad_f0, s.grad_beta / self.k


POTENTIALS: Dict[PotentialKind, Callable[[World, float], ArtificialPotential]] = {
    PotentialKind.RIMON_KODITSCHEK: RimonKoditschekPotential,
    PotentialKind.LOG_BARRIER: LogBarrierPotential,
}


def make_potential(world: World, spec: PotentialSpec) -> ArtificialPotential:
    return POTENTIALS[spec.kind](world, spec.k)


def phi(world: World, spec: PotentialSpec, x: Any) -> float:
    return make_potential(world, spec).value(x)


def phi_gradient(world: World, spec: PotentialSpec, x: Any) -> np.ndarray:
    return make_potential(world, spec).gradient(x)


def descent_direction(world: World, spec: PotentialSpec, x: Any) -> np.ndarray:
    """Positive multiple of the potential gradient that stays bounded on the boundary.

    RK: beta grad f0 - (f0/k) grad beta. Log barrier: beta grad f0 - grad beta / k.
    """
    return make_potential(world, spec).direction(x)


def descent_scale(world: World, spec: PotentialSpec, x: Any) -> float:
    """descent_direction(x) / phi_gradient(x): (f0^k+beta)^(1+1/k) for RK, beta for log."""
    return math.exp(make_potential(world, spec).log_scale(x))


def relative_residual(potential: ArtificialPotential, x: Any) -> float:
    """|a - b| / (|a| + |b|) for the two terms of the descent direction."""
    a, b = potential.direction_terms(x)
    denom = float(np.linalg.norm(a) + np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b)) / denom


