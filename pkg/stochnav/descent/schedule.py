from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np
from scipy.special import digamma, polygamma

from ..errors import ScheduleError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepSchedule:
    """eps_t = eps0 / (1 + zeta t): strictly decreasing, not summable, square-summable."""

    eps0: float = 5e-2
    zeta: float = 5e-3

    def __post_init__(self) -> None:
        if not (math.isfinite(self.eps0) and self.eps0 > 0):
            raise ScheduleError(f"eps0 must be positive, got {self.eps0}")
        if not (math.isfinite(self.zeta) and self.zeta > 0):
            raise ScheduleError(f"zeta must be positive, got {self.zeta}")

    def step(self, t: int) -> float:
        return self.eps0 / (1.0 + self.zeta * t)

    def steps(self, count: int) -> np.ndarray:
        return self.eps0 / (1.0 + self.zeta * np.arange(count))

    def partial_sum(self, count: int) -> float:
        """sum_{t<count} eps_t, through the digamma function."""
        a = 1.0 / self.zeta
        return float(self.eps0 / self.zeta * (digamma(count + a) - digamma(a)))

    def partial_square_sum(self, count: int) -> float:
        a = 1.0 / self.zeta
        return float((self.eps0 / self.zeta) ** 2 * (polygamma(1, a) - polygamma(1, count + a)))

    @property
    def square_sum_limit(self) -> float:
        return float((self.eps0 / self.zeta) ** 2 * polygamma(1, 1.0 / self.zeta))

    def check_bound(self, limit: float, enforce: bool = True) -> bool:
        """Compare eps0 against the non-collision limit min gamma_i / B.

        Raises when `enforce` is set, otherwise logs and reports the violation.
        """
        if self.eps0 < limit:
            return True
        message = f"eps0 = {self.eps0:g} is not below the non-collision limit {limit:.6g}"
        if enforce:
            raise ScheduleError(message)
        logger.warning("%s; running with collision monitoring", message)
        return False

    def to_dict(self) -> Dict[str, Any]:
        return {"eps0": self.eps0, "zeta": self.zeta}
