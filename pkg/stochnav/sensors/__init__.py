from .noise import NoiseModel, Quantity, Substreams
from .rig import (
    EstimatorKind,
    Measurements,
    ObstacleReading,
    SensorRig,
    awareness_set,
    curvature_radius,
    estimator_kind,
    measure,
)
from .estimators import (
    GradientEstimate,
    circle_fit_estimate,
    ellipse_fit_estimate,
    estimate,
    exact_estimate,
    fitted_factors,
    log_barrier_estimate,
)
from .calibration import (
    Calibration,
    calibrate,
    max_estimate_norm,
    outward_radius,
    step_bound,
)

__all__ = [
    "NoiseModel",
    "Quantity",
    "Substreams",
    "EstimatorKind",
    "Measurements",
    "ObstacleReading",
    "SensorRig",
    "awareness_set",
    "curvature_radius",
    "estimator_kind",
    "measure",
    "GradientEstimate",
    "circle_fit_estimate",
    "ellipse_fit_estimate",
    "estimate",
    "exact_estimate",
    "fitted_factors",
    "log_barrier_estimate",
    "Calibration",
    "calibrate",
    "max_estimate_norm",
    "outward_radius",
    "step_bound",
]
