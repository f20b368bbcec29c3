"""Histogram-driven under/oversampling for imbalanced regression on data streams."""

from histstream.data import (
    Dataset,
    Instance,
    PhaseSplit,
    SyntheticConfig,
    generate_synthetic,
    load_csv,
    split_phases,
    write_csv,
)
from histstream.density import PidHistogram, RelevanceModel, build_relevance, phi, relative_density
from histstream.errors import (
    ConfigError,
    DataError,
    HistStreamError,
    InputError,
    NoRelevantInstancesError,
    RunError,
    StateError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "Dataset",
    "HistStreamError",
    "InputError",
    "Instance",
    "NoRelevantInstancesError",
    "PhaseSplit",
    "PidHistogram",
    "RelevanceModel",
    "RunError",
    "StateError",
    "SyntheticConfig",
    "build_relevance",
    "generate_synthetic",
    "load_csv",
    "phi",
    "relative_density",
    "split_phases",
    "write_csv",
]
