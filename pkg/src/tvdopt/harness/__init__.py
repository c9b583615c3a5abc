"""Data ingestion, reference solutions, experiment orchestration and CLI."""

from .experiment import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    ExperimentResult,
    consensus_bench,
    load_config,
    run_experiment,
)
from .libsvm import (
    LibsvmDataset,
    LibsvmParseError,
    format_libsvm,
    parse_libsvm,
    partition_dataset,
    synthetic_dataset,
    write_libsvm,
)
from .reference import ReferenceSolution, solve_reference

__all__ = [
    "CSV_HEADER",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "LibsvmDataset",
    "LibsvmParseError",
    "ReferenceSolution",
    "consensus_bench",
    "format_libsvm",
    "load_config",
    "parse_libsvm",
    "partition_dataset",
    "run_experiment",
    "solve_reference",
    "synthetic_dataset",
    "write_libsvm",
]
