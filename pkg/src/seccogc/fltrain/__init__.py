"""Desk-scale federated training on top of the aggregation protocols."""

from .data import (Dataset, DatasetPartition, TooFewSamples, dirichlet_partition, load_csv,
                   synthetic_gaussian_mixture)
from .models import MLP, LogisticRegression, make_model
from .training import (LOG_COLUMNS, NonFiniteLoss, TrainingAborted, TrainingConfig, TrainingLog,
                       evaluate, local_update, train)

__all__ = [
    "Dataset", "DatasetPartition", "TooFewSamples", "dirichlet_partition", "load_csv",
    "synthetic_gaussian_mixture", "MLP", "LogisticRegression", "make_model", "LOG_COLUMNS",
    "NonFiniteLoss", "TrainingAborted", "TrainingConfig", "TrainingLog", "evaluate",
    "local_update", "train",
]
