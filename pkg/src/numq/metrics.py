"""The eight quality dimensions, each scored as an exact proportion m/n.

Every metric returns a :class:`DimensionScore`. When a dimension cannot be
measured (no reference values, no arrival times, ...) the score is marked
not evaluable rather than reported as 0 or 1.

Thresholds are inclusive throughout: a distance equal to the tolerance, or a
delay equal to the budget, passes.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Union

import numpy as np

from .dataset import Dataset, ExpectedGrid, Series
from .rules import Rule, check_rules

ACCESSIBILITY = "accessibility"
ACCURACY = "accuracy"
COMPLETENESS = "completeness"
CONSISTENCY = "consistency"
CURRENCY = "currency"
TIMELINESS = "timeliness"
PRECISION = "precision"
UNIQUENESS = "uniqueness"

DIMENSIONS = (
    ACCESSIBILITY, ACCURACY, COMPLETENESS, CONSISTENCY,
    CURRENCY, TIMELINESS, PRECISION, UNIQUENESS,
)

DEFAULT_UNIQUENESS_WINDOW = 16


@dataclass(frozen=True)
class DimensionScore:
    dimension: str
    numerator: int
    denominator: int
    auxiliary: dict[str, Any] = field(default_factory=dict)
    evaluable: bool = True
    reason: str = ""

    def __post_init__(self) -> None:
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"unknown dimension {self.dimension!r}")
        if self.evaluable and not 0 <= self.numerator <= self.denominator:
            raise ValueError(f"need 0 <= m <= n, got m={self.numerator}, n={self.denominator}")
        if self.evaluable and self.denominator <= 0:
            raise ValueError("evaluable score needs a positive denominator")

    @classmethod
    def not_evaluable(cls, dimension: str, reason: str, **auxiliary: Any) -> "DimensionScore":
        return cls(dimension, 0, 0, auxiliary, evaluable=False, reason=reason)

    @property
    def proportion(self) -> Optional[Fraction]:
        if not self.evaluable:
            return None
        return Fraction(self.numerator, self.denominator)

    def __float__(self) -> float:
        if not self.evaluable:
            raise ValueError(f"{self.dimension} score is not evaluable")
        return self.numerator / self.denominator


# ----------------------------------------------------------------- reference


@dataclass(frozen=True, eq=False)
class ReferenceValues:
    """Expert-supplied true values for one parameter, sorted by timestamp."""

    timestamps: np.ndarray
    values: np.ndarray

    @classmethod
    def from_pairs(cls, pairs) -> "ReferenceValues":
        pairs = sorted((int(t), float(v)) for t, v in pairs)
        ts = np.array([t for t, _ in pairs], dtype=np.int64)
        vals = np.array([v for _, v in pairs], dtype=np.float64)
        return cls.from_arrays(ts, vals)

    @classmethod
    def from_arrays(cls, timestamps, values) -> "ReferenceValues":
        ts = np.asarray(timestamps, dtype=np.int64)
        vals = np.asarray(values, dtype=np.float64)
        order = np.argsort(ts, kind="stable")
        ts, vals = ts[order], vals[order]
        if ts.size > 1 and np.any(np.diff(ts) == 0):
            raise ValueError("reference has repeated timestamps")
        if not np.all(np.isfinite(vals)):
            raise ValueError("reference values must be finite")
        ts.flags.writeable = False
        vals.flags.writeable = False
        return cls(ts, vals)

    @classmethod
    def from_series(cls, series: Series) -> "ReferenceValues":
        p = series.present
        return cls.from_arrays(series.timestamps[p], series.values[p])

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def match(self, timestamps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (mask of matched input positions, true value per matched one)."""
        if self.timestamps.size == 0:
            return np.zeros(timestamps.shape, dtype=bool), np.empty(0)
        pos = np.searchsorted(self.timestamps, timestamps)
        pos_c = np.minimum(pos, self.timestamps.size - 1)
        hit = self.timestamps[pos_c] == timestamps
        return hit, self.values[pos_c[hit]]


@dataclass(frozen=True)
class ParameterReference:
    """Per-parameter expectations. ``None`` disables the dependent dimension."""

    true_values: Optional[ReferenceValues] = None
    tolerance: float = 0.0
    distance_mode: str = "absolute"
    freshness_horizon_ms: Optional[int] = None
    delay_budget_ms: Optional[int] = None
    precision_threshold: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.tolerance >= 0:
            raise ValueError("tolerance must be >= 0")
        if self.distance_mode not in ("absolute", "relative"):
            raise ValueError(f"unknown distance mode {self.distance_mode!r}")
        if self.freshness_horizon_ms is not None and self.freshness_horizon_ms <= 0:
            raise ValueError("freshness horizon must be > 0")
        if self.delay_budget_ms is not None and self.delay_budget_ms < 0:
            raise ValueError("delay budget must be >= 0")
        if self.precision_threshold is not None and not self.precision_threshold >= 0:
            raise ValueError("precision threshold must be >= 0")
        if (
            self.distance_mode == "relative"
            and self.true_values is not None
            and np.any(self.true_values.values == 0)
        ):
            raise ValueError("relative distance needs nonzero reference values")


# ------------------------------------------------------------------ distance


def distance(x: float, x_true: float, mode: str = "absolute") -> float:
    """Distance of a reading from its true value: absolute or relative."""
    if mode == "absolute":
        return abs(x - x_true)
    if mode == "relative":
        if x_true == 0:
            raise ValueError("relative distance is undefined for a zero true value")
        return abs(x - x_true) / abs(x_true)
    raise ValueError(f"unknown distance mode {mode!r}")


def distances(x: np.ndarray, x_true: np.ndarray, mode: str = "absolute") -> np.ndarray:
    """Elementwise :func:`distance` (same IEEE operations, vectorized)."""
    if mode == "absolute":
        return np.abs(x - x_true)
    if mode == "relative":
        if np.any(x_true == 0):
            raise ValueError("relative distance is undefined for a zero true value")
        return np.abs(x - x_true) / np.abs(x_true)
    raise ValueError(f"unknown distance mode {mode!r}")


# ------------------------------------------------------------------- metrics


def accuracy(series: Series, ref: ParameterReference) -> DimensionScore:
    """Share of matched readings within ``ref.tolerance`` of their true value.

    ``auxiliary["mean_distance"]`` carries the plain mean distance over the
    matched readings; points without a reference timestamp are excluded from
    n and counted as ``unmatched``.
    """
    if ref.true_values is None or len(ref.true_values) == 0:
        return DimensionScore.not_evaluable(ACCURACY, "no reference values")
    idx = np.flatnonzero(series.present)
    hit, truth = ref.true_values.match(series.timestamps[idx])
    n = int(hit.sum())
    unmatched = int(idx.size - n)
    if n == 0:
        return DimensionScore.not_evaluable(
            ACCURACY, "no reading matches a reference timestamp", unmatched=unmatched
        )
    d = distances(series.values[idx[hit]], truth, ref.distance_mode)
    m = int(np.count_nonzero(d <= ref.tolerance))
    return DimensionScore(
        ACCURACY, m, n,
        {
            "mean_distance": math.fsum(d.tolist()) / n,
            "max_distance": float(d.max()),
            "unmatched": unmatched,
            "tolerance": ref.tolerance,
            "distance_mode": ref.distance_mode,
        },
    )


def grid_coverage(series: Series, grid: ExpectedGrid) -> tuple[np.ndarray, np.ndarray]:
    """For each grid slot: (row exists, row exists with a present value)."""
    slots = grid.timestamps()
    if len(series) == 0:
        empty = np.zeros(slots.shape, dtype=bool)
        return empty, empty
    pos = np.searchsorted(series.timestamps, slots)
    pos_c = np.minimum(pos, len(series) - 1)
    row = series.timestamps[pos_c] == slots
    return row, row & series.present[pos_c]


def _off_grid(timestamps: np.ndarray, grid: ExpectedGrid) -> int:
    on = (
        (timestamps >= grid.start)
        & (timestamps <= grid.end)
        & ((timestamps - grid.start) % grid.interval == 0)
    )
    return int(np.count_nonzero(~on))


def completeness(series: Series, grid: ExpectedGrid) -> DimensionScore:
    row, filled = grid_coverage(series, grid)
    return DimensionScore(
        COMPLETENESS, int(filled.sum()), grid.size,
        {
            "off_grid_points": _off_grid(series.timestamps, grid),
            "null_value_slots": int(np.count_nonzero(row & ~filled)),
        },
    )


def consistency(series: Series, rules: list[Rule]) -> DimensionScore:
    """Each (present point, applicable rule) pair is one check."""
    outcomes = check_rules(series, rules)
    if not outcomes:
        return DimensionScore.not_evaluable(CONSISTENCY, "no applicable rules")
    checked = sum(o.passed.size for o in outcomes)
    if checked == 0:
        return DimensionScore.not_evaluable(CONSISTENCY, "no present values to check")
    passed = sum(int(o.passed.sum()) for o in outcomes)
    per_rule = {
        o.rule.rule_id: {"passed": int(o.passed.sum()), "checked": int(o.passed.size)}
        for o in outcomes
    }
    return DimensionScore(CONSISTENCY, passed, checked, {"rules": per_rule})


def currency(
    series: Series,
    horizon_ms: int,
    as_of: int,
    granularity: str = "point",
) -> DimensionScore:
    """A reading is current when ``as_of - timestamp <= horizon_ms``.

    With ``granularity="series"`` the whole series is one object, current
    when its newest reading is.
    """
    if horizon_ms <= 0:
        raise ValueError("freshness horizon must be > 0")
    ts = series.timestamps[series.present]
    if ts.size == 0:
        return DimensionScore.not_evaluable(CURRENCY, "no present values")
    age = as_of - ts
    aux: dict[str, Any] = {"horizon_ms": int(horizon_ms), "as_of": int(as_of)}
    future = int(np.count_nonzero(age < 0))
    if future:
        aux["clock_anomaly"] = {"future_points": future}
    if granularity == "point":
        m, n = int(np.count_nonzero(age <= horizon_ms)), int(ts.size)
    elif granularity == "series":
        m, n = int(as_of - int(ts.max()) <= horizon_ms), 1
    else:
        raise ValueError(f"unknown currency granularity {granularity!r}")
    aux["granularity"] = granularity
    return DimensionScore(CURRENCY, m, n, aux)


def timeliness(series: Series, delay_budget_ms: int, clock_skew_ms: int = 0) -> DimensionScore:
    """Share of received readings whose generation-to-arrival delay is within
    budget. Arrivals earlier than ``timestamp - clock_skew_ms`` are untimely
    and flagged as anomalies."""
    has = series.has_arrival
    n = int(np.count_nonzero(has))
    missing = int(has.size - n)
    if n == 0:
        return DimensionScore.not_evaluable(
            TIMELINESS, "no arrival timestamps", without_arrival=missing
        )
    delay = series.arrivals[has] - series.timestamps[has]
    early = delay < -clock_skew_ms
    timely = (delay <= delay_budget_ms) & ~early
    aux: dict[str, Any] = {
        "delay_budget_ms": int(delay_budget_ms),
        "without_arrival": missing,
        "max_delay_ms": int(delay.max()),
    }
    if early.any():
        aux["negative_delay_anomalies"] = int(early.sum())
    return DimensionScore(TIMELINESS, int(timely.sum()), n, aux)


@dataclass(frozen=True)
class Consecutive:
    """Each adjacent pair of readings is a repeat pair."""


@dataclass(frozen=True)
class Window:
    """Readings in the same ``width_ms`` bucket (epoch-aligned) are mutual
    replicates; every unordered pair within a bucket is compared."""

    width_ms: int

    def __post_init__(self) -> None:
        if self.width_ms <= 0:
            raise ValueError("window width must be positive")


Grouping = Union[Consecutive, Window]


def _close_pairs_in_buckets(buckets: np.ndarray, vals: np.ndarray, threshold: float) -> tuple[int, int]:
    """Count (close, total) unordered pairs sharing a bucket.

    Values are sorted within buckets; for sorted values ``s[j] - s[i]`` is
    monotone in ``j`` (rounding is monotone), so the last close partner of
    each ``i`` is found by a vectorized bisection with the exact same
    floating-point comparison a pairwise scan would make.
    """
    order = np.lexsort((vals, buckets))
    b = buckets[order]
    s = vals[order]
    size = s.size
    starts = np.flatnonzero(np.r_[True, b[1:] != b[:-1]])
    ends = np.r_[starts[1:], size]
    lengths = ends - starts
    total = int(np.sum(lengths * (lengths - 1) // 2))
    bucket_end = np.repeat(ends, lengths)
    i = np.arange(size)
    lo = i.copy()
    hi = bucket_end.copy()
    active = lo + 1 < hi
    while active.any():
        mid = (lo + hi) // 2
        mid_safe = np.where(active, mid, i)
        ok = (s[mid_safe] - s) <= threshold
        lo = np.where(active & ok, mid, lo)
        hi = np.where(active & ~ok, mid, hi)
        active = lo + 1 < hi
    close = int(np.sum(lo - i))
    return close, total


def precision(series: Series, threshold: float, grouping: Grouping = Consecutive()) -> DimensionScore:
    """Share of repeat pairs whose absolute distance is within ``threshold``."""
    if not threshold >= 0:
        raise ValueError("precision threshold must be >= 0")
    p = series.present
    vals = series.values[p]
    if isinstance(grouping, Consecutive):
        if vals.size < 2:
            return DimensionScore.not_evaluable(PRECISION, "fewer than 2 readings")
        diffs = np.abs(vals[1:] - vals[:-1])
        m, n = int(np.count_nonzero(diffs <= threshold)), int(diffs.size)
        aux: dict[str, Any] = {"grouping": "consecutive"}
    elif isinstance(grouping, Window):
        buckets = series.timestamps[p] // grouping.width_ms
        m, n = _close_pairs_in_buckets(buckets, vals, threshold) if vals.size else (0, 0)
        if n == 0:
            return DimensionScore.not_evaluable(PRECISION, "no bucket holds 2 or more readings")
        aux = {"grouping": "window", "width_ms": int(grouping.width_ms)}
    else:
        raise TypeError(f"unknown grouping {grouping!r}")
    aux["threshold"] = threshold
    return DimensionScore(PRECISION, m, n, aux)


# ---------------------------------------------------------------- uniqueness


@dataclass(frozen=True)
class WindowRef:
    parameter_id: str
    index: int
    start: int
    end: int


def _window_key(series: Series, lo: int, hi: int) -> tuple:
    present = series.present[lo:hi]
    vals = np.where(present, series.values[lo:hi], 0.0) + 0.0  # folds -0.0 into 0.0
    return (
        hi - lo,
        series.timestamps[lo:hi].tobytes(),
        present.tobytes(),
        vals.tobytes(),
    )


def dataset_windows(dataset: Dataset, window: int) -> list[tuple[WindowRef, tuple]]:
    """Non-overlapping windows of ``window`` consecutive points per series,
    the final short window included, with their exact content keys."""
    if window < 1:
        raise ValueError("window length must be >= 1")
    out = []
    for s in dataset.series:
        for j, lo in enumerate(range(0, len(s), window)):
            hi = min(lo + window, len(s))
            ref = WindowRef(s.parameter_id, j, int(s.timestamps[lo]), int(s.timestamps[hi - 1]))
            out.append((ref, _window_key(s, lo, hi)))
    return out


def duplicate_window_groups(dataset: Dataset, window: int) -> tuple[int, list[list[WindowRef]]]:
    """Return (total windows, groups of verbatim-identical windows of size >= 2).
    Groups are ordered by their first member."""
    windows = dataset_windows(dataset, window)
    by_key: dict[tuple, list[WindowRef]] = {}
    for ref, key in windows:
        by_key.setdefault(key, []).append(ref)
    groups = [g for g in by_key.values() if len(g) > 1]
    groups.sort(key=lambda g: (g[0].parameter_id, g[0].index))
    return len(windows), groups


def _uniqueness_score(
    total: int, flagged: int, groups: list[list[WindowRef]], window: int
) -> DimensionScore:
    return DimensionScore(
        UNIQUENESS, total - flagged, total,
        {
            "window": window,
            "duplicate_groups": [[[w.parameter_id, w.index] for w in g] for g in groups],
        },
    )


def uniqueness(dataset: Dataset, window: int = DEFAULT_UNIQUENESS_WINDOW) -> DimensionScore:
    """Share of windows that no other window in the dataset reproduces."""
    if not any(s.present_count for s in dataset.series):
        return DimensionScore.not_evaluable(UNIQUENESS, "dataset has no values")
    total, groups = duplicate_window_groups(dataset, window)
    flagged = sum(len(g) for g in groups)
    return _uniqueness_score(total, flagged, groups, window)


def uniqueness_by_parameter(dataset: Dataset, window: int = DEFAULT_UNIQUENESS_WINDOW) -> dict[str, DimensionScore]:
    """Per-parameter view: a window is unique when no other window anywhere in
    the dataset equals it."""
    total, groups = duplicate_window_groups(dataset, window)
    flagged: dict[str, int] = {}
    member_groups: dict[str, list[list[WindowRef]]] = {}
    for g in groups:
        for w in g:
            flagged[w.parameter_id] = flagged.get(w.parameter_id, 0) + 1
        for pid in sorted({w.parameter_id for w in g}):
            member_groups.setdefault(pid, []).append(g)
    out = {}
    for s in dataset.series:
        pid = s.parameter_id
        count = -(-len(s) // window)
        if s.present_count == 0:
            out[pid] = DimensionScore.not_evaluable(UNIQUENESS, "series has no values")
            continue
        out[pid] = _uniqueness_score(
            count, flagged.get(pid, 0), member_groups.get(pid, []), window
        )
    return out


# ------------------------------------------------------------- accessibility


class LatencyLog:
    """Retrieval latency (ms) per (parameter, timestamp) record."""

    def __init__(self, records=()) -> None:
        grouped: dict[str, dict[int, int]] = {}
        for parameter, ts, latency in records:
            grouped.setdefault(str(parameter), {})[int(ts)] = int(latency)
        self._by_param: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for pid, entries in grouped.items():
            keys = np.array(sorted(entries), dtype=np.int64)
            lat = np.array([entries[k] for k in keys.tolist()], dtype=np.int64)
            self._by_param[pid] = (keys, lat)

    def __len__(self) -> int:
        return sum(k.size for k, _ in self._by_param.values())

    def lookup(self, parameter_id: str, timestamps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (logged mask, latency per position; 0 where not logged)."""
        keys, lat = self._by_param.get(parameter_id, (np.empty(0, np.int64), np.empty(0, np.int64)))
        if keys.size == 0:
            return np.zeros(timestamps.shape, dtype=bool), np.zeros(timestamps.shape, np.int64)
        pos = np.minimum(np.searchsorted(keys, timestamps), keys.size - 1)
        hit = keys[pos] == timestamps
        return hit, np.where(hit, lat[pos], 0)

    def records(self) -> list[tuple[str, int, int]]:
        return [
            (pid, int(t), int(l))
            for pid, (keys, lat) in sorted(self._by_param.items())
            for t, l in zip(keys.tolist(), lat.tolist())
        ]


def grid_manifest(dataset: Dataset, grid: ExpectedGrid) -> dict[str, np.ndarray]:
    """Default manifest: every grid timestamp for every parameter."""
    slots = grid.timestamps()
    return {pid: slots for pid in dataset.parameter_ids}


def accessibility(
    dataset: Dataset,
    manifest: Mapping[str, np.ndarray],
    latency_log: Optional[LatencyLog] = None,
    latency_budget_ms: Optional[int] = None,
) -> DimensionScore:
    """Share of manifest records that exist, carry a parsed value and, when a
    latency log is given, were retrieved within ``latency_budget_ms``.

    Records the log does not mention are not penalised for latency; they
    are counted in ``auxiliary["unlogged"]``.
    """
    if latency_log is not None and latency_budget_ms is None:
        raise ValueError("a latency log requires a latency budget")
    n = m = missing = null = slow = unlogged = 0
    for pid in sorted(manifest):
        expected = np.unique(np.asarray(manifest[pid], dtype=np.int64))
        n += expected.size
        if expected.size == 0:
            continue
        if pid in dataset:
            s = dataset.get(pid)
            if len(s):
                pos = np.minimum(np.searchsorted(s.timestamps, expected), len(s) - 1)
                row = s.timestamps[pos] == expected
                ok = row & s.present[pos]
            else:
                row = ok = np.zeros(expected.shape, dtype=bool)
        else:
            row = ok = np.zeros(expected.shape, dtype=bool)
        missing += int(np.count_nonzero(~row))
        null += int(np.count_nonzero(row & ~ok))
        if latency_log is not None:
            logged, lat = latency_log.lookup(pid, expected)
            too_slow = ok & logged & (lat > latency_budget_ms)
            slow += int(np.count_nonzero(too_slow))
            unlogged += int(np.count_nonzero(ok & ~logged))
            ok = ok & ~too_slow
        m += int(np.count_nonzero(ok))
    if n == 0:
        return DimensionScore.not_evaluable(ACCESSIBILITY, "empty manifest")
    aux: dict[str, Any] = {"missing": missing, "null_values": null}
    if latency_log is not None:
        aux.update(slow=slow, unlogged=unlogged, latency_budget_ms=int(latency_budget_ms))
    return DimensionScore(ACCESSIBILITY, m, n, aux)
