"""Mutation-kill verdicts, NKI and monotonicity audits for DNN prediction matrices."""

__version__ = "0.1.0"

from .killdefs import (
    DEFINITIONS,
    KillParams,
    KillVerdict,
    kd1_killed,
    kd2_killed,
    kd3_killed_class,
    kd4_killed,
    kdf_input_kills,
    kdf_killed,
    mutation_score,
    nki,
)
from .matrixio import (
    CorrectnessMatrix,
    DataFormatError,
    GroundTruth,
    PredictionMatrix,
    accuracy_sample,
    correctness,
    load_predictions,
)
from .monotonicity import AuditConfig, AuditTrace, audit, is_monotone
from .stats import ContingencyTable, cohens_d, fisher_exact, hypergeom_point_prob, two_sample_ttest

__all__ = [
    "DEFINITIONS",
    "AuditConfig",
    "AuditTrace",
    "ContingencyTable",
    "CorrectnessMatrix",
    "DataFormatError",
    "GroundTruth",
    "KillParams",
    "KillVerdict",
    "PredictionMatrix",
    "accuracy_sample",
    "audit",
    "cohens_d",
    "correctness",
    "fisher_exact",
    "hypergeom_point_prob",
    "is_monotone",
    "kd1_killed",
    "kd2_killed",
    "kd3_killed_class",
    "kd4_killed",
    "kdf_input_kills",
    "kdf_killed",
    "load_predictions",
    "mutation_score",
    "nki",
    "two_sample_ttest",
]
