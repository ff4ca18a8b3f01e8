"""Energy-community simulation and anomaly-detection workbench."""

__version__ = "0.1.0"

from .simulator import (
    FEATURE_COLUMNS,
    MeasurementFrame,
    SimulationConfig,
    TimeSeries,
    read_csv,
    simulate,
    write_csv,
)
from .attacks import SCENARIO_PRESETS, AttackSpec, gain_hook, inject
from .pipeline import NormalizationStats, SequenceDataset, fit_normalizer, split_train_val, window
from .model import (
    ModelConfig,
    ModelParameters,
    forward,
    init,
    load_checkpoint,
    param_count,
    reconstruction_error,
    save_checkpoint,
)
from .training import TrainingConfig, TrainingReport, train
from .detection import DetectionReport, Threshold, classify, error_histogram, evaluate, fit_threshold
from .federated import FederationConfig, fed_avg, run_federation
from .scoring import LoadedModel, compare_models

__all__ = [
    "FEATURE_COLUMNS",
    "MeasurementFrame",
    "SimulationConfig",
    "TimeSeries",
    "read_csv",
    "simulate",
    "write_csv",
    "SCENARIO_PRESETS",
    "AttackSpec",
    "gain_hook",
    "inject",
    "NormalizationStats",
    "SequenceDataset",
    "fit_normalizer",
    "split_train_val",
    "window",
    "ModelConfig",
    "ModelParameters",
    "forward",
    "init",
    "load_checkpoint",
    "param_count",
    "reconstruction_error",
    "save_checkpoint",
    "TrainingConfig",
    "TrainingReport",
    "train",
    "DetectionReport",
    "Threshold",
    "classify",
    "error_histogram",
    "evaluate",
    "fit_threshold",
    "FederationConfig",
    "fed_avg",
    "run_federation",
    "LoadedModel",
    "compare_models",
    "__version__",
]
