"""Run every dimension and detector over a dataset and assemble the report."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .dataset import Dataset, ExpectedGrid, validate_dataset
from .detectors import (
    DEFAULT_Z_THRESHOLD, Finding, detect_duplicate_subsets, detect_gaps,
    detect_inconsistency, detect_outdated, detect_outliers, detect_systematic_error,
)
from .errors import DatasetError, EvaluationError, NotEvaluableError
from .metrics import (
    ACCESSIBILITY, COMPLETENESS, CURRENCY, DEFAULT_UNIQUENESS_WINDOW, DIMENSIONS,
    PRECISION, TIMELINESS, Consecutive, DimensionScore, Grouping, LatencyLog,
    ParameterReference, Window, accessibility, accuracy, completeness, consistency,
    currency, precision, timeliness, uniqueness_by_parameter,
)
from .rules import Rule

log = logging.getLogger(__name__)

REPORT_SCHEMA = "numq.report/1"
_FINDINGS_SLOT = "\u0000findings"

# Format defects that make metric inputs meaningless. Early arrivals are
# left to the timeliness metric, which counts them as untimely anomalies.
FATAL_VIOLATIONS = {
    "empty-dataset", "duplicate-parameter", "empty-series", "unordered-timestamps",
    "non-finite-value",
}


@dataclass(frozen=True)
class DetectorSettings:
    z_threshold: float = DEFAULT_Z_THRESHOLD
    bias_threshold: Optional[float] = None  # None: reuse each parameter's tolerance
    drift_threshold: Optional[float] = None


@dataclass(frozen=True, eq=False)
class EvaluationConfig:
    references: Mapping[str, ParameterReference] = field(default_factory=dict)
    default_reference: ParameterReference = ParameterReference()
    rules: tuple[Rule, ...] = ()
    grid: Optional[ExpectedGrid] = None
    as_of: Optional[int] = None
    uniqueness_window: int = DEFAULT_UNIQUENESS_WINDOW
    precision_grouping: Grouping = Consecutive()
    currency_granularity: str = "point"
    manifest: Optional[Mapping[str, np.ndarray]] = None
    latency_log: Optional[LatencyLog] = None
    latency_budget_ms: Optional[int] = None
    clock_skew_ms: int = 0
    detectors: DetectorSettings = DetectorSettings()

    def reference_for(self, parameter_id: str) -> ParameterReference:
        return self.references.get(parameter_id, self.default_reference)

    def describe(self) -> dict:
        """Canonical JSON-ready description; large arrays enter as digests."""

        def digest(*arrays: np.ndarray) -> str:
            h = hashlib.sha256()
            for a in arrays:
                h.update(np.ascontiguousarray(a).tobytes())
            return h.hexdigest()

        def ref(r: ParameterReference) -> dict:
            return {
                "tolerance": r.tolerance,
                "distance_mode": r.distance_mode,
                "freshness_horizon_ms": r.freshness_horizon_ms,
                "delay_budget_ms": r.delay_budget_ms,
                "precision_threshold": r.precision_threshold,
                "true_values": None if r.true_values is None else {
                    "count": len(r.true_values),
                    "sha256": digest(r.true_values.timestamps, r.true_values.values),
                },
            }

        grouping = self.precision_grouping
        return {
            "references": {k: ref(v) for k, v in sorted(self.references.items())},
            "default_reference": ref(self.default_reference),
            "rules": [r.describe() for r in self.rules],
            "grid": None if self.grid is None else {
                "start": self.grid.start, "end": self.grid.end, "interval": self.grid.interval,
            },
            "uniqueness_window": self.uniqueness_window,
            "precision_grouping": (
                {"type": "window", "width_ms": grouping.width_ms}
                if isinstance(grouping, Window) else {"type": "consecutive"}
            ),
            "currency_granularity": self.currency_granularity,
            "manifest": None if self.manifest is None else {
                k: digest(np.asarray(v, dtype=np.int64)) for k, v in sorted(self.manifest.items())
            },
            "latency_log": None if self.latency_log is None else hashlib.sha256(
                json.dumps(self.latency_log.records()).encode()
            ).hexdigest(),
            "latency_budget_ms": self.latency_budget_ms,
            "clock_skew_ms": self.clock_skew_ms,
            "detectors": {
                "z_threshold": self.detectors.z_threshold,
                "bias_threshold": self.detectors.bias_threshold,
                "drift_threshold": self.detectors.drift_threshold,
            },
        }

    def fingerprint(self) -> str:
        text = json.dumps(self.describe(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def format_proportion(p: Fraction) -> str:
    """Six fractional digits, rounded half-to-even from the exact rational."""
    q = round(p * 10**6)
    return f"{q // 10**6}.{q % 10**6:06d}"


@dataclass(frozen=True)
class AggregateScore:
    """Dataset-level score: value-count-weighted mean of parameter proportions."""

    dimension: str
    proportion: Optional[Fraction]
    weight: int = 0
    parameters: int = 0

    @property
    def evaluable(self) -> bool:
        return self.proportion is not None


def aggregate(scores: Mapping[str, DimensionScore], weights: Mapping[str, int], dimension: str) -> AggregateScore:
    evaluable = [(pid, s) for pid, s in sorted(scores.items()) if s.evaluable]
    if not evaluable:
        return AggregateScore(dimension, None)
    w = {pid: weights.get(pid, 0) for pid, _ in evaluable}
    total = sum(w.values())
    if total == 0:
        # every evaluable parameter is value-less: fall back to equal weights
        w = {pid: 1 for pid in w}
        total = len(w)
    mean = sum((Fraction(w[pid]) * s.proportion for pid, s in evaluable), Fraction(0)) / total
    return AggregateScore(dimension, mean, total, len(evaluable))


def _score_to_dict(s: DimensionScore) -> dict:
    return {
        "evaluable": s.evaluable,
        "proportion": format_proportion(s.proportion) if s.evaluable else None,
        "numerator": s.numerator if s.evaluable else None,
        "denominator": s.denominator if s.evaluable else None,
        "reason": s.reason or None,
        "auxiliary": s.auxiliary,
    }


def _score_from_dict(dimension: str, d: dict) -> DimensionScore:
    if not d["evaluable"]:
        return DimensionScore(dimension, 0, 0, dict(d.get("auxiliary") or {}), False, d.get("reason") or "")
    return DimensionScore(
        dimension, int(d["numerator"]), int(d["denominator"]),
        dict(d.get("auxiliary") or {}), True, d.get("reason") or "",
    )


@dataclass(frozen=True)
class QualityReport:
    dataset_id: str
    evaluated_at: int
    config_fingerprint: str
    scores: Mapping[str, Mapping[str, DimensionScore]]
    aggregate: Mapping[str, AggregateScore]
    findings: tuple[Finding, ...] = ()
    notes: tuple[str, ...] = ()

    def score(self, parameter_id: str, dimension: str) -> DimensionScore:
        return self.scores[parameter_id][dimension]

    def findings_of(self, kind: str) -> list[Finding]:
        return [f for f in self.findings if f.kind == kind]

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "dataset_id": self.dataset_id,
            "evaluated_at": self.evaluated_at,
            "config_fingerprint": self.config_fingerprint,
            "parameters": {
                pid: {dim: _score_to_dict(s) for dim, s in dims.items()}
                for pid, dims in self.scores.items()
            },
            "aggregate": {
                dim: {
                    "evaluable": a.evaluable,
                    "proportion": format_proportion(a.proportion) if a.evaluable else None,
                    "exact": (
                        [a.proportion.numerator, a.proportion.denominator] if a.evaluable else None
                    ),
                    "weight": a.weight,
                    "parameters": a.parameters,
                }
                for dim, a in self.aggregate.items()
            },
            "findings": [f.to_dict() for f in self.findings],
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        """Canonical JSON: sorted keys, two-space indent, one finding per line.

        Findings are encoded separately with the compact C encoder (the
        indenting encoder is pure Python and dominates on large reports)."""
        data = self.to_dict()
        findings = data.pop("findings")
        data["findings"] = _FINDINGS_SLOT
        text = json.dumps(data, sort_keys=True, indent=2, allow_nan=False)
        if findings:
            rows = ",\n".join(
                "    " + json.dumps(f, sort_keys=True, allow_nan=False) for f in findings
            )
            block = "[\n" + rows + "\n  ]"
        else:
            block = "[]"
        # the key cannot occur inside an encoded string, whose quotes are escaped
        slot = f'"findings": {json.dumps(_FINDINGS_SLOT)}'
        return text.replace(slot, '"findings": ' + block, 1) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "QualityReport":
        if data.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"not a numq report (schema {data.get('schema')!r})")
        scores = {
            pid: {dim: _score_from_dict(dim, sd) for dim, sd in dims.items()}
            for pid, dims in data["parameters"].items()
        }
        agg = {}
        for dim, a in data["aggregate"].items():
            p = Fraction(*a["exact"]) if a["evaluable"] else None
            agg[dim] = AggregateScore(dim, p, int(a["weight"]), int(a["parameters"]))
        return cls(
            data["dataset_id"], int(data["evaluated_at"]), data["config_fingerprint"],
            scores, agg,
            tuple(Finding.from_dict(f) for f in data.get("findings", [])),
            tuple(data.get("notes", [])),
        )

    @classmethod
    def from_json(cls, text: str) -> "QualityReport":
        return cls.from_dict(json.loads(text))


def _parameter_scores(series, dataset, config, as_of, uniq) -> dict[str, DimensionScore]:
    pid = series.parameter_id
    ref = config.reference_for(pid)
    out: dict[str, DimensionScore] = {}

    if config.manifest is not None:
        expected = config.manifest.get(pid)
        out[ACCESSIBILITY] = (
            accessibility(dataset, {pid: expected}, config.latency_log, config.latency_budget_ms)
            if expected is not None
            else DimensionScore.not_evaluable(ACCESSIBILITY, "parameter not in manifest")
        )
    elif config.grid is not None:
        out[ACCESSIBILITY] = accessibility(
            dataset, {pid: config.grid.timestamps()}, config.latency_log, config.latency_budget_ms
        )
    else:
        out[ACCESSIBILITY] = DimensionScore.not_evaluable(ACCESSIBILITY, "no manifest or expected grid")

    out["accuracy"] = accuracy(series, ref)
    out[COMPLETENESS] = (
        completeness(series, config.grid) if config.grid is not None
        else DimensionScore.not_evaluable(COMPLETENESS, "no expected grid")
    )
    out["consistency"] = consistency(series, list(config.rules))
    out[CURRENCY] = (
        currency(series, ref.freshness_horizon_ms, as_of, config.currency_granularity)
        if ref.freshness_horizon_ms is not None
        else DimensionScore.not_evaluable(CURRENCY, "no freshness horizon")
    )
    out[TIMELINESS] = (
        timeliness(series, ref.delay_budget_ms, config.clock_skew_ms)
        if ref.delay_budget_ms is not None
        else DimensionScore.not_evaluable(TIMELINESS, "no delay budget")
    )
    out[PRECISION] = (
        precision(series, ref.precision_threshold, config.precision_grouping)
        if ref.precision_threshold is not None
        else DimensionScore.not_evaluable(PRECISION, "no precision threshold")
    )
    out["uniqueness"] = uniq[pid]
    return {dim: out[dim] for dim in DIMENSIONS}


def run_detectors(dataset: Dataset, config: EvaluationConfig, as_of: int) -> tuple[list[Finding], list[str]]:
    findings: list[Finding] = []
    notes: list[str] = []
    for s in dataset.series:
        ref = config.reference_for(s.parameter_id)
        if config.grid is not None:
            findings += detect_gaps(s, config.grid)
        try:
            findings += detect_outliers(s, config.detectors.z_threshold)
        except NotEvaluableError as exc:
            notes.append(f"outliers not evaluable: {exc}")
        bias = config.detectors.bias_threshold
        try:
            findings += detect_systematic_error(
                s, ref.true_values, ref.tolerance if bias is None else bias,
                config.detectors.drift_threshold,
            )
        except NotEvaluableError as exc:
            notes.append(f"systematic error not evaluable: {exc}")
        findings += detect_outdated(
            s, ref.freshness_horizon_ms, ref.delay_budget_ms, as_of, config.clock_skew_ms
        )
        if config.rules:
            try:
                findings += detect_inconsistency(s, list(config.rules))
            except NotEvaluableError as exc:
                notes.append(f"inconsistency not evaluable: {exc}")
    findings += detect_duplicate_subsets(dataset, config.uniqueness_window)
    findings.sort(key=Finding.sort_key)
    return findings, notes


def evaluate_all(
    dataset: Dataset,
    config: EvaluationConfig,
    as_of: Optional[int] = None,
    detectors: bool = True,
) -> QualityReport:
    """Score every dimension for every parameter and run the detectors.

    ``as_of`` (ms) overrides ``config.as_of``; when both are absent the wall
    clock is used, which makes currency results time-dependent.

    Raises:
        DatasetError: the dataset has structural violations.
        EvaluationError: no dimension is evaluable for any parameter.
    """
    fatal = [v for v in validate_dataset(dataset, config.clock_skew_ms) if v.kind in FATAL_VIOLATIONS]
    if fatal:
        shown = "; ".join(v.message for v in fatal[:5])
        raise DatasetError(f"{len(fatal)} structural violation(s): {shown}")
    if as_of is None:
        as_of = config.as_of if config.as_of is not None else int(time.time() * 1000)

    notes = []
    for pid in sorted(set(config.references) - set(dataset.parameter_ids)):
        notes.append(f"config references unknown parameter {pid!r}")
        log.warning("config references unknown parameter %r", pid)
    for rule in config.rules:
        if rule.scope != "*" and rule.scope not in dataset:
            notes.append(f"rule {rule.rule_id!r} scoped to unknown parameter {rule.scope!r}")

    uniq = uniqueness_by_parameter(dataset, config.uniqueness_window)
    scores = {s.parameter_id: _parameter_scores(s, dataset, config, as_of, uniq) for s in dataset.series}
    if not any(sc.evaluable for dims in scores.values() for sc in dims.values()):
        raise EvaluationError("no dimension is evaluable for any parameter")

    weights = {s.parameter_id: s.present_count for s in dataset.series}
    agg = {
        dim: aggregate({pid: dims[dim] for pid, dims in scores.items()}, weights, dim)
        for dim in DIMENSIONS
    }
    findings: list[Finding] = []
    if detectors:
        findings, detector_notes = run_detectors(dataset, config, as_of)
        notes += detector_notes
    return QualityReport(
        dataset.dataset_id, int(as_of), config.fingerprint(), scores, agg,
        tuple(findings), tuple(notes),
    )
