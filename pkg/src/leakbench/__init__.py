"""leakbench: a leakage-aware evaluation harness for univariate
time-series forecasting.

Builds sliding-window datasets, applies 2-way / 3-way / k-fold validation
in leaky (window-then-split) and clean (split-then-window) modes, trains a
from-scratch LSTM forecaster, audits train/test contamination as raw-index
overlap, and quantifies leakage-induced evaluation bias via the RMSE gain
metric.
"""

__version__ = "0.1.0"

from .audit import AuditReport, apply_buffer, audit, minimal_clearing_gap
from .errors import (
    AuditError,
    ContaminationError,
    DataError,
    LeakbenchError,
    SplitError,
    TrainingError,
    WindowError,
)
from .forecaster import (
    LstmModel,
    Scaler,
    TrainConfig,
    TrainOutcome,
    baseline_linear_ar,
    baseline_persistence,
    gradient_check,
    load_checkpoint,
    lstm_forward,
    predict,
    save_checkpoint,
    train,
    write_loss_history,
)
from .metrics import GainRecord, RunStats, aggregate, leakage_rank, rmse, rmse_gain
from .runner import (
    CellResult,
    ExperimentConfig,
    ExperimentReport,
    emit_plot_data,
    emit_report,
    load_report,
    recompute_gains,
    run_experiment,
)
from .series import (
    DescriptiveStats,
    Decomposition,
    TimeSeries,
    describe,
    load_csv,
    seasonal_decompose,
    write_csv,
)
from .splitting import SplitPlan, SplitResult, SplitSpec, describe_split, split
from .synthetic import reference_series, write_reference_csv
from .windowing import (
    SequencePair,
    SequenceSet,
    WindowConfig,
    footprint,
    make_sequences,
    merge_sequence_sets,
)

__all__ = [
    "__version__",
    "AuditError",
    "AuditReport",
    "CellResult",
    "ContaminationError",
    "DataError",
    "Decomposition",
    "DescriptiveStats",
    "ExperimentConfig",
    "ExperimentReport",
    "GainRecord",
    "LeakbenchError",
    "LstmModel",
    "RunStats",
    "Scaler",
    "SequencePair",
    "SequenceSet",
    "SplitError",
    "SplitPlan",
    "SplitResult",
    "SplitSpec",
    "TimeSeries",
    "TrainConfig",
    "TrainOutcome",
    "TrainingError",
    "WindowConfig",
    "WindowError",
    "aggregate",
    "apply_buffer",
    "audit",
    "baseline_linear_ar",
    "baseline_persistence",
    "describe",
    "describe_split",
    "emit_plot_data",
    "emit_report",
    "footprint",
    "gradient_check",
    "leakage_rank",
    "load_checkpoint",
    "load_csv",
    "load_report",
    "lstm_forward",
    "make_sequences",
    "merge_sequence_sets",
    "minimal_clearing_gap",
    "predict",
    "recompute_gains",
    "reference_series",
    "rmse",
    "rmse_gain",
    "run_experiment",
    "save_checkpoint",
    "seasonal_decompose",
    "split",
    "train",
    "write_csv",
    "write_loss_history",
    "write_reference_csv",
]
