from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, Dict, Optional

import numpy as np

from ..errors import InvariantViolation


class Quantity(IntEnum):
    """Measured quantities; each one draws from its own substream."""

    OBJECTIVE = 0
    OBJECTIVE_GRADIENT = 1
    DISTANCE = 2
    CURVATURE = 3
    NORMAL = 4
    ELLIPSE_CENTER = 5
    ELLIPSE_RADIUS = 6
    ELLIPSE_MATRIX = 7


@dataclass(frozen=True)
class NoiseModel:
    """Additive zero-mean Gaussian noise.

    Obstacle quantities use std eta * d^p where d is the true distance to the
    obstacle, so sensing is exact on the boundary. `eta_normal` and
    `eta_curvature` override eta for those quantities when set.
    """

    sigma_f0: float = 0.0
    sigma_grad_f0: float = 0.0
    eta: float = 0.0
    distance_exponent: float = 1.0
    eta_normal: Optional[float] = None
    eta_curvature: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("sigma_f0", "sigma_grad_f0", "eta", "eta_normal", "eta_curvature"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value >= 0):
                raise InvariantViolation(f"{name} must be a finite nonnegative number, got {value}")
        if not self.distance_exponent >= 1.0:
            raise InvariantViolation(f"distance exponent must be at least 1, got {self.distance_exponent}")

    def _std(self, gain: float, d: float) -> float:
        return gain * max(d, 0.0) ** self.distance_exponent

    def distance_std(self, d: float) -> float:
        return self._std(self.eta, d)

    def curvature_std(self, d: float) -> float:
        return self._std(self.eta if self.eta_curvature is None else self.eta_curvature, d)

    def normal_std(self, d: float) -> float:
        return self._std(self.eta if self.eta_normal is None else self.eta_normal, d)

    @property
    def is_exact(self) -> bool:
        return (
            self.sigma_f0 == 0
            and self.sigma_grad_f0 == 0
            and self.eta == 0
            and not self.eta_normal
            and not self.eta_curvature
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigma_f0": self.sigma_f0,
            "sigma_gradf0": self.sigma_grad_f0,
            "eta": self.eta,
            "distance_noise_exponent": self.distance_exponent,
            "eta_normal": self.eta_normal,
            "eta_curvature": self.eta_curvature,
        }


class Substreams:
    """Counter-based random streams keyed by (step, obstacle index, quantity).

    The same key always yields the same generator state, so a measurement is
    reproducible from the seed alone, independent of query order.
    """

    def __init__(self, seed: int) -> None:
        self.seed = int(seed)

    def generator(self, t: int, index: int, quantity: Quantity) -> np.random.Generator:
        key = np.random.SeedSequence(self.seed, spawn_key=(int(t), int(index), int(quantity)))
        return np.random.default_rng(key)

    def normal(self, t: int, index: int, quantity: Quantity, std: float, shape: Any) -> np.ndarray:
        if std == 0.0:
            return np.zeros(shape)
        return self.generator(t, index, quantity).normal(0.0, std, size=shape)
