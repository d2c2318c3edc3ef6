from __future__ import annotations

from typing import Optional


class StochNavError(ValueError):
    """Base class for all errors raised by stochnav."""


class CollisionQueryError(StochNavError):
    """A query that requires a point outside an obstacle got one inside or on it."""


class ProjectionError(StochNavError):
    def __init__(self, message: str, residual: float) -> None:
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class OutsideFreeSpaceError(StochNavError):
    pass


class InvariantViolation(StochNavError):
    pass


class InfeasibleParametersError(StochNavError):
    pass


class ScheduleError(StochNavError):
    pass


class UnsupportedEstimatorError(StochNavError):
    pass


class NotASaddleError(StochNavError):
    pass


class ConfigError(StochNavError):
    def __init__(self, message: str, *, field: Optional[str] = None, line: Optional[int] = None) -> None:
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")
        self.field = field
        self.line = line
