"""EEG feature extraction and hybrid classification toolkit.

Pipeline in one breath: windowed single-channel EEG -> per-epoch
features (nonlinear energy, RMS, spectral energy, delta fraction;
RMS/IAV/MAVS/zero-crossings for the network path) -> either a calibrated
kernel SVM or an evidence-selected Bayesian network (optionally behind
swarm feature selection) -> nested leave-one-subject-out evaluation with
per-subject majority voting.
"""

from .errors import (
    ConvergenceError,
    DataError,
    EegFusionError,
    InternalError,
    NumericError,
    ParameterError,
    SearchError,
    StateError,
    UsageError,
)
from .signal_core import ClassLabel, Epoch, TimeSeries, validate, window

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ClassLabel",
    "ConvergenceError",
    "DataError",
    "EegFusionError",
    "Epoch",
    "InternalError",
    "NumericError",
    "ParameterError",
    "SearchError",
    "StateError",
    "TimeSeries",
    "UsageError",
    "validate",
    "window",
]
