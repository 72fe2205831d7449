"""Explainable event-level classifier: population discovery and fuzzy voting."""
from .data import EventTable, Schema, generate_jittered_iris, load_csv, write_csv
from .errors import AbstainError, AlpodsError, BundleError, InputError
from .evaluation import cross_validate, understandability
from .pipeline import Model, TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "AbstainError", "AlpodsError", "BundleError", "EventTable", "InputError", "Model", "Schema",
    "TrainConfig", "cross_validate", "generate_jittered_iris", "load_csv", "train",
    "understandability", "write_csv",
]
