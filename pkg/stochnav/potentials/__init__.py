from .potential import (
    POTENTIALS,
    ArtificialPotential,
    LogBarrierPotential,
    PointState,
    PotentialKind,
    PotentialSpec,
    RimonKoditschekPotential,
    descent_direction,
    descent_scale,
    evaluate,
    make_potential,
    phi,
    phi_gradient,
    relative_residual,
)
from .condition import ConditionReport, ObstacleCondition, check_condition
from .critical import (
    CriticalKind,
    CriticalPoint,
    CriticalPointReport,
    OrderSearch,
    classify,
    default_seeds,
    direction_jacobian,
    find_critical_points,
    finite_difference_jacobian,
    locate_minimum,
    search_order,
)

__all__ = [
    "POTENTIALS",
    "ArtificialPotential",
    "LogBarrierPotential",
    "PointState",
    "PotentialKind",
    "PotentialSpec",
    "RimonKoditschekPotential",
    "descent_direction",
    "descent_scale",
    "evaluate",
    "make_potential",
    "phi",
    "phi_gradient",
    "relative_residual",
    "ConditionReport",
    "ObstacleCondition",
    "check_condition",
    "CriticalKind",
    "CriticalPoint",
    "CriticalPointReport",
    "OrderSearch",
    "classify",
    "default_seeds",
    "direction_jacobian",
    "find_critical_points",
    "finite_difference_jacobian",
    "locate_minimum",
    "search_order",
]
