"""Scaling-law estimation from checkpoint logs."""

from ._core import (
    CheckpointRecord,
    DataError,
    FitResult,
    LawParams,
    NumericError,
    ScaledFamily,
    UsageError,
    are,
    baseline_best_performance,
    baseline_most_trained,
    eval_law,
    fit,
    ingest_file,
    ingest_string,
    log_spaced_sizes,
    pca,
    run_cli,
    serialize,
    split,
    synthesize,
)

__all__ = [
    "CheckpointRecord",
    "DataError",
    "FitResult",
    "LawParams",
    "NumericError",
    "ScaledFamily",
    "UsageError",
    "are",
    "baseline_best_performance",
    "baseline_most_trained",
    "eval_law",
    "fit",
    "ingest_file",
    "ingest_string",
    "log_spaced_sizes",
    "pca",
    "run_cli",
    "serialize",
    "split",
    "synthesize",
]
