"""Antipattern detectors.

Detectors explain score drops: each returns :class:`Finding` objects that
locate a concrete defect and name the dimension it degrades. They never
modify data. A detector with no applicable mode raises
:class:`~numq.errors.NotEvaluableError`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .dataset import Dataset, ExpectedGrid, Series
from .errors import NotEvaluableError
from .metrics import (
    COMPLETENESS, CONSISTENCY, CURRENCY, PRECISION, TIMELINESS, UNIQUENESS,
    ReferenceValues, grid_coverage, duplicate_window_groups,
)
from .rules import Rule, check_rules

GAP = "gap"
OUTLIER = "outlier"
SYSTEMATIC_BIAS = "systematic-bias"
SYSTEMATIC_DRIFT = "systematic-drift"
STALE = "stale"
DELAYED = "delayed"
RULE_VIOLATION = "rule-violation"
DUPLICATE_SUBSET = "duplicate-subset"

FINDING_KINDS = (
    GAP, OUTLIER, SYSTEMATIC_BIAS, SYSTEMATIC_DRIFT, STALE, DELAYED, RULE_VIOLATION,
    DUPLICATE_SUBSET,
)

LINKED_DIMENSION = {
    GAP: COMPLETENESS,
    OUTLIER: PRECISION,
    SYSTEMATIC_BIAS: CONSISTENCY,
    SYSTEMATIC_DRIFT: CONSISTENCY,
    STALE: CURRENCY,
    DELAYED: TIMELINESS,
    RULE_VIOLATION: CONSISTENCY,
    DUPLICATE_SUBSET: UNIQUENESS,
}

DEFAULT_Z_THRESHOLD = 3.5
MIN_OUTLIER_POINTS = 8
MIN_DRIFT_POINTS = 16
# 0.6745 ~ Phi^-1(0.75): scales MAD to a standard deviation for normal data.
MAD_SCALE = 0.6745


@dataclass(frozen=True)
class Finding:
    kind: str
    parameter_id: str
    start: int
    end: int
    magnitude: float
    detail: dict[str, Any] = field(default_factory=dict)

    @property
    def linked_dimension(self) -> str:
        return LINKED_DIMENSION[self.kind]

    def sort_key(self) -> tuple:
        return (self.parameter_id, self.kind, self.start, self.end, repr(sorted(self.detail.items())))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "parameter": self.parameter_id,
            "start": self.start,
            "end": self.end,
            "magnitude": self.magnitude,
            "linked_dimension": self.linked_dimension,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Finding":
        return cls(
            data["kind"], data["parameter"], int(data["start"]), int(data["end"]),
            float(data["magnitude"]), dict(data.get("detail", {})),
        )


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of True as inclusive (first, last) index pairs."""
    padded = np.r_[False, mask, False].astype(np.int8)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def detect_gaps(series: Series, grid: ExpectedGrid) -> list[Finding]:
    """One finding per maximal run of grid slots lacking a present value."""
    _, filled = grid_coverage(series, grid)
    slots = grid.timestamps()
    return [
        Finding(
            GAP, series.parameter_id, int(slots[a]), int(slots[b]), float(b - a + 1),
            {"slots": [a, b]},
        )
        for a, b in _runs(~filled)
    ]


def robust_z_scores(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Return (z per value, median, MAD). z is NaN everywhere when MAD == 0."""
    med = float(np.median(values))
    dev = np.abs(values - med)
    mad = float(np.median(dev))
    if mad == 0:
        return np.full(values.shape, np.nan), med, mad
    return MAD_SCALE * dev / mad, med, mad


def detect_outliers(series: Series, z_threshold: float = DEFAULT_Z_THRESHOLD) -> list[Finding]:
    """Flag readings whose robust (median/MAD) z-score exceeds ``z_threshold``.

    If MAD is zero (a constant baseline) every reading that differs from the
    median is flagged instead, with magnitude ``|x - median|``.
    """
    if not z_threshold > 0:
        raise ValueError("z_threshold must be positive")
    idx = np.flatnonzero(series.present)
    if idx.size < MIN_OUTLIER_POINTS:
        raise NotEvaluableError(
            f"{series.parameter_id}: outlier detection needs {MIN_OUTLIER_POINTS} "
            f"values, got {idx.size}"
        )
    vals = series.values[idx]
    z, med, mad = robust_z_scores(vals)
    findings = []
    if mad == 0:
        for k in np.flatnonzero(vals != med):
            ts = int(series.timestamps[idx[k]])
            findings.append(
                Finding(OUTLIER, series.parameter_id, ts, ts, float(abs(vals[k] - med)),
                        {"median": med, "mad": 0.0, "value": float(vals[k])})
            )
        return findings
    for k in np.flatnonzero(z > z_threshold):
        ts = int(series.timestamps[idx[k]])
        findings.append(
            Finding(OUTLIER, series.parameter_id, ts, ts, float(z[k]),
                    {"median": med, "mad": mad, "value": float(vals[k])})
        )
    return findings


def least_squares_slope(timestamps: np.ndarray, values: np.ndarray) -> float:
    """Slope of the ordinary least-squares line of value against time (per ms)."""
    t = timestamps.astype(np.float64)
    tc = t - t.mean()
    denom = float(np.dot(tc, tc))
    if denom == 0:
        raise NotEvaluableError("drift needs at least two distinct timestamps")
    return float(np.dot(tc, values - values.mean()) / denom)


def detect_systematic_error(
    series: Series,
    reference: Optional[ReferenceValues] = None,
    bias_threshold: Optional[float] = None,
    drift_threshold: Optional[float] = None,
) -> list[Finding]:
    """Bias against reference values and/or linear drift over time.

    With a reference, the mean signed residual (value - true) is compared
    with ``bias_threshold``. Independently, when ``drift_threshold`` is given
    and the series has at least 16 readings, the least-squares slope is
    compared with it. Both limits are strict: equality is not a finding.
    """
    idx = np.flatnonzero(series.present)
    ts = series.timestamps[idx]
    vals = series.values[idx]
    findings: list[Finding] = []
    ran = False

    if reference is not None and bias_threshold is not None and len(reference):
        hit, truth = reference.match(ts)
        if hit.any():
            ran = True
            residual = vals[hit] - truth
            mean_res = float(residual.mean())
            if abs(mean_res) > bias_threshold:
                mts = ts[hit]
                findings.append(
                    Finding(SYSTEMATIC_BIAS, series.parameter_id, int(mts[0]), int(mts[-1]),
                            mean_res, {"matched": int(hit.sum()), "threshold": bias_threshold})
                )

    if drift_threshold is not None and idx.size >= MIN_DRIFT_POINTS:
        slope = least_squares_slope(ts, vals)
        ran = True
        if abs(slope) > drift_threshold:
            findings.append(
                Finding(SYSTEMATIC_DRIFT, series.parameter_id, int(ts[0]), int(ts[-1]),
                        slope, {"points": int(idx.size), "threshold": drift_threshold})
            )

    if not ran:
        raise NotEvaluableError(
            f"{series.parameter_id}: systematic-error check needs reference values "
            f"or a drift threshold with >= {MIN_DRIFT_POINTS} readings"
        )
    return findings


def detect_outdated(
    series: Series,
    horizon_ms: Optional[int],
    delay_budget_ms: Optional[int],
    as_of: Optional[int],
    clock_skew_ms: int = 0,
) -> list[Finding]:
    """Stale readings (older than the horizon at ``as_of``) and delayed
    arrivals (delay beyond budget, or arrival before generation beyond the
    skew allowance). Magnitudes are overruns in ms."""
    findings = []
    if horizon_ms is not None and as_of is not None:
        ts = series.timestamps[series.present]
        age = as_of - ts
        stale = age > horizon_ms
        pid = series.parameter_id
        findings.extend(
            Finding(STALE, pid, t, t, float(a - horizon_ms), {"age_ms": a})
            for t, a in zip(ts[stale].tolist(), age[stale].tolist())
        )
    if delay_budget_ms is not None:
        idx = np.flatnonzero(series.has_arrival)
        delay = series.arrivals[idx] - series.timestamps[idx]
        for k in np.flatnonzero((delay > delay_budget_ms) | (delay < -clock_skew_ms)):
            ts = int(series.timestamps[idx[k]])
            d = int(delay[k])
            if d > delay_budget_ms:
                findings.append(
                    Finding(DELAYED, series.parameter_id, ts, ts, float(d - delay_budget_ms),
                            {"delay_ms": d})
                )
            else:
                findings.append(
                    Finding(DELAYED, series.parameter_id, ts, ts, float(-clock_skew_ms - d),
                            {"delay_ms": d, "anomaly": "arrival-before-generation"})
                )
    return findings


def detect_inconsistency(series: Series, rules: list[Rule]) -> list[Finding]:
    """One finding per (reading, failed rule); magnitude is the reading."""
    outcomes = check_rules(series, rules)
    if not outcomes:
        raise NotEvaluableError(f"{series.parameter_id}: no applicable rules")
    findings = []
    for o in outcomes:
        for k in np.flatnonzero(~o.passed):
            pos = o.point_index[k]
            ts = int(series.timestamps[pos])
            findings.append(
                Finding(RULE_VIOLATION, series.parameter_id, ts, ts,
                        float(series.values[pos]), {"rule": o.rule.rule_id})
            )
    findings.sort(key=Finding.sort_key)
    return findings


def detect_duplicate_subsets(dataset: Dataset, window: int) -> list[Finding]:
    """Every window belonging to a group of two or more verbatim-identical
    windows yields one finding; ``detail["group"]`` ties copies together."""
    _, groups = duplicate_window_groups(dataset, window)
    findings = []
    for g_id, group in enumerate(groups):
        for w in group:
            findings.append(
                Finding(DUPLICATE_SUBSET, w.parameter_id, w.start, w.end, float(len(group)),
                        {"group": g_id, "window": w.index, "window_length": window})
            )
    return findings
