from .bias import (
    AlphaReading,
    AwarenessSweep,
    BiasReport,
    BiasTerms,
    DecayFit,
    MonteCarloBias,
    alpha,
    awareness_sweep,
    bias_grid,
    bias_report,
    bias_terms,
    bracket_bound,
    closed_form_bias,
    fit_decay,
    log_alpha,
    monte_carlo_bias,
    nearest_obstacle,
    saddle_bias_decay,
    sample_estimates,
    scaled_bias,
    scaled_bias_decay,
    sensed_log_product,
)
from .quotients import (
    QuotientRow,
    QuotientTable,
    SignAgreement,
    quadratic_quotients,
    saddle_frame,
    saddle_quotient_check,
    sign_agreement,
)

__all__ = [
    "AlphaReading",
    "AwarenessSweep",
    "BiasReport",
    "BiasTerms",
    "DecayFit",
    "MonteCarloBias",
    "alpha",
    "awareness_sweep",
    "bias_grid",
    "bias_report",
    "bias_terms",
    "bracket_bound",
    "closed_form_bias",
    "fit_decay",
    "log_alpha",
    "monte_carlo_bias",
    "nearest_obstacle",
    "saddle_bias_decay",
    "sample_estimates",
    "scaled_bias",
    "scaled_bias_decay",
    "sensed_log_product",
    "QuotientRow",
    "QuotientTable",
    "SignAgreement",
    "quadratic_quotients",
    "saddle_frame",
    "saddle_quotient_check",
    "sign_agreement",
]
