"""Fairness auditing for binary classifiers with binary, multi-valued and intersectional attributes."""

from .data import (Dataset, DatasetManifest, GroupPartition, PredictionSet, SensitiveAttribute,
                   ingest, load_predictions, partition, perturb, super_partition)
from .errors import (EmptyCellError, FairnessError, IngestError, NotApplicableError,
                     PreconditionError, ValidationError)
from .group import FORMS, equalized_odds, probe_forms, probe_metric
from .hfm import hfm_approx, hfm_avg, hfm_max, hfm_prev
from .individual import discriminative_risk, general_entropy_index, theil_index
from .learners import cross_validate, performance, train
from .results import MetricResult

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DatasetManifest", "GroupPartition", "PredictionSet", "SensitiveAttribute",
    "ingest", "load_predictions", "partition", "perturb", "super_partition",
    "EmptyCellError", "FairnessError", "IngestError", "NotApplicableError",
    "PreconditionError", "ValidationError",
    "FORMS", "equalized_odds", "probe_forms", "probe_metric",
    "hfm_approx", "hfm_avg", "hfm_max", "hfm_prev",
    "discriminative_risk", "general_entropy_index", "theil_index",
    "cross_validate", "performance", "train", "MetricResult",
]
