from .schedule import StepSchedule
from .trajectory import StepRecord, TerminationStatus, Trajectory, read_csv
from .sgd import (
    EscapeStatistics,
    default_stop_radius,
    run_gradient_flow_baseline,
    run_sgd,
    saddle_escape_trial,
    trial_seed,
)
from .metrics import ConvergenceMetrics, convergence_metrics, deviation, path_length

__all__ = [
    "StepSchedule",
    "StepRecord",
    "TerminationStatus",
    "Trajectory",
    "read_csv",
    "EscapeStatistics",
    "default_stop_radius",
    "run_gradient_flow_baseline",
    "run_sgd",
    "saddle_escape_trial",
    "trial_seed",
    "ConvergenceMetrics",
    "convergence_metrics",
    "deviation",
    "path_length",
]
