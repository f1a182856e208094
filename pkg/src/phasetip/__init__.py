"""phasetip: tipping-point assessment of treatment-phase contributions.

Survival engine (Kaplan-Meier, log-rank, time-varying Cox), counterfactual
phase transforms with censoring/event imputation, tipping-point search with
multiple imputation, a calibrated two-phase trial simulator, and a CLI.
"""

from .counterfactual import (
    CensoringModel,
    Effect,
    ImputationDraws,
    MonoEventModel,
    Threshold,
    TransformParams,
    apply_transform,
    fit_censoring_model,
    fit_mono_event_model,
    impute_censoring_cutoff,
    impute_event_time,
    make_draws,
    naive_transform,
    sample_censoring_conditional,
    transform_effect1,
    transform_effect2,
)
from .dataio import HEADER, read_dataset, write_dataset
from .errors import (
    ConvergenceError,
    DataError,
    EstimationError,
    PhasetipError,
    SeparationError,
)
from .records import Arm, CountingProcessRow, SubjectRecord
from .simulate import SimConfig, simulate_trial, summarize_trial
from .survival import (
    CoxFit,
    KmCurve,
    LogRankResult,
    PhaseHr,
    cox_fit,
    km_estimate,
    logrank_test,
    partial_loglik_and_gradient,
    phase_hr,
    to_counting_process,
)
from .tipping import (
    SearchConfig,
    TpaCurvePoint,
    TpaResult,
    evaluate_at,
    find_tipping,
    find_tipping_a,
    find_tipping_b,
    grid_scan,
    mi_aggregate,
)

__version__ = "0.1.0"

__all__ = [
    "Arm", "SubjectRecord", "CountingProcessRow",
    "PhasetipError", "DataError", "EstimationError", "ConvergenceError",
    "SeparationError",
    "KmCurve", "LogRankResult", "CoxFit", "PhaseHr",
    "km_estimate", "logrank_test", "to_counting_process", "cox_fit",
    "partial_loglik_and_gradient", "phase_hr",
    "Effect", "Threshold", "TransformParams", "CensoringModel",
    "MonoEventModel", "ImputationDraws",
    "impute_censoring_cutoff", "fit_censoring_model",
    "sample_censoring_conditional", "fit_mono_event_model",
    "impute_event_time", "transform_effect1", "transform_effect2",
    "apply_transform", "naive_transform", "make_draws",
    "SearchConfig", "TpaCurvePoint", "TpaResult",
    "evaluate_at", "find_tipping", "find_tipping_a", "find_tipping_b",
    "grid_scan", "mi_aggregate",
    "SimConfig", "simulate_trial", "summarize_trial",
    "HEADER", "read_dataset", "write_dataset",
    "__version__",
]
