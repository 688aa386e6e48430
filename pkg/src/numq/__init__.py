"""numq: context-dependent quality evaluation for numerical time-series data."""

from .dataset import (
    ColumnMapping, DataPoint, Dataset, ExpectedGrid, ParseReport, Series, Violation,
    expected_grid_timestamps, parse_dataset, serialize_dataset, validate_dataset,
)
from .detectors import (
    Finding, detect_duplicate_subsets, detect_gaps, detect_inconsistency, detect_outdated,
    detect_outliers, detect_systematic_error,
)
from .evaluate import EvaluationConfig, DetectorSettings, QualityReport, evaluate_all
from .gate import (
    DecisionLedger, DecisionRecord, GateOutcome, GatePolicy, PolicyEntry, band, condition_key,
    gate, record_decision,
)
from .inject import AntipatternSpec, Annotation, inject_antipattern
from .metrics import (
    DIMENSIONS, Consecutive, DimensionScore, LatencyLog, ParameterReference, ReferenceValues,
    Window, accessibility, accuracy, completeness, consistency, currency, distance, precision,
    timeliness, uniqueness,
)
from .rules import Rule

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "AntipatternSpec",
    "ColumnMapping",
    "Consecutive",
    "DIMENSIONS",
    "DataPoint",
    "Dataset",
    "DecisionLedger",
    "DecisionRecord",
    "DetectorSettings",
    "DimensionScore",
    "EvaluationConfig",
    "ExpectedGrid",
    "Finding",
    "GateOutcome",
    "GatePolicy",
    "LatencyLog",
    "ParameterReference",
    "ParseReport",
    "PolicyEntry",
    "QualityReport",
    "ReferenceValues",
    "Rule",
    "Series",
    "Violation",
    "Window",
    "accessibility",
    "accuracy",
    "band",
    "completeness",
    "condition_key",
    "consistency",
    "currency",
    "detect_duplicate_subsets",
    "detect_gaps",
    "detect_inconsistency",
    "detect_outdated",
    "detect_outliers",
    "detect_systematic_error",
    "distance",
    "evaluate_all",
    "expected_grid_timestamps",
    "gate",
    "inject_antipattern",
    "parse_dataset",
    "precision",
    "record_decision",
    "serialize_dataset",
    "timeliness",
    "uniqueness",
    "validate_dataset",
]
