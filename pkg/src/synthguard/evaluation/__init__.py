"""Quality-of-generation suite."""

from synthguard.evaluation.evaluator import EvaluatorConfig, EvaluatorModel, Windows, make_windows, train_evaluator
from synthguard.evaluation.metrics import (
    AcfSeries,
    MomentsTable,
    autocorrelation,
    column_moments_diff,
    f1_macro,
    length_distribution,
    mode_collapse_flag,
    rmse,
)
from synthguard.evaluation.qog import (
    GRID,
    SCENARIOS,
    EvalScenario,
    PredictiveReport,
    QogReport,
    describe_datasets,
    predictive_grid,
    resolve_scenario,
    run_predictive_eval,
    run_qog,
    sequences_from_rows,
)

__all__ = [
    "GRID",
    "SCENARIOS",
    "AcfSeries",
    "EvalScenario",
    "EvaluatorConfig",
    "EvaluatorModel",
    "MomentsTable",
    "PredictiveReport",
    "QogReport",
    "Windows",
    "autocorrelation",
    "column_moments_diff",
    "describe_datasets",
    "f1_macro",
    "length_distribution",
    "make_windows",
    "mode_collapse_flag",
    "predictive_grid",
    "resolve_scenario",
    "rmse",
    "run_predictive_eval",
    "run_qog",
    "sequences_from_rows",
    "train_evaluator",
]
