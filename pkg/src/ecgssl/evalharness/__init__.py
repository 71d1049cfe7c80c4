"""Patient-wise cross-validation, metrics and windowed inference."""

from ecgssl.evalharness.experiments import (
    EvalConfig,
    ExperimentOutput,
    LeakageError,
    run_ssl_experiment,
    run_supervised_experiment,
)
from ecgssl.evalharness.folds import FoldSplit, make_stratified_patient_folds
from ecgssl.evalharness.metrics import MetricsReport, compute_metrics, roc_auc
from ecgssl.evalharness.windowing import (
    StripPrediction,
    WindowSweepResult,
    sweep_window,
    windowed_inference,
)

__all__ = [name for name in dir() if not name.startswith("_")]
