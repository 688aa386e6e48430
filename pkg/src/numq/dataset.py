"""Canonical in-memory dataset model, file ingestion and structural checks.

A dataset is a set of per-parameter series. Each series stores its points
column-wise in read-only numpy arrays:

- ``timestamps``: int64 UTC milliseconds, strictly ascending
- ``values``: float64, NaN wherever the value is absent
- ``present``: bool mask, False for rows whose value was null/unparseable
- ``arrivals`` / ``has_arrival``: int64 receive time and its mask

A row present with an absent value is *not* the same as a missing row:
missing rows are completeness gaps, null rows are accessibility failures.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import IO, Optional, Union

import numpy as np

from .errors import EmptyDatasetError, SchemaError
from .timeutil import is_integer_text, parse_rfc3339

CANONICAL_COLUMNS = ("timestamp", "parameter", "value", "arrival_timestamp")

_NULL_TOKENS = {"", "null", "none", "na", "n/a"}


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True, slots=True)
class DataPoint:
    timestamp: int
    value: Optional[float] = None
    arrival_timestamp: Optional[int] = None


@dataclass(frozen=True, eq=False)
class Series:
    """One parameter's points, column-wise. Use :meth:`from_arrays` or
    :meth:`from_points` rather than the raw constructor."""

    parameter_id: str
    unit: str
    timestamps: np.ndarray
    values: np.ndarray
    present: np.ndarray
    arrivals: np.ndarray
    has_arrival: np.ndarray

    @classmethod
    def from_arrays(
        cls,
        parameter_id: str,
        timestamps: Sequence[int] | np.ndarray,
        values: Sequence[float] | np.ndarray,
        present: Sequence[bool] | np.ndarray | None = None,
        arrivals: Sequence[int] | np.ndarray | None = None,
        has_arrival: Sequence[bool] | np.ndarray | None = None,
        unit: str = "",
    ) -> "Series":
        ts = np.array(timestamps, dtype=np.int64)
        vals = np.array(values, dtype=np.float64)
        if vals.shape != ts.shape:
            raise ValueError("timestamps and values must have equal length")
        if present is None:
            pres = ~np.isnan(vals)
        else:
            pres = np.array(present, dtype=bool)
        vals = np.where(pres, vals, np.nan)
        if arrivals is None:
            arr = np.zeros(ts.shape, dtype=np.int64)
            has = np.zeros(ts.shape, dtype=bool)
        else:
            arr = np.array(arrivals, dtype=np.int64)
            has = (
                np.ones(ts.shape, dtype=bool)
                if has_arrival is None
                else np.array(has_arrival, dtype=bool)
            )
            arr = np.where(has, arr, 0)
        return cls(
            parameter_id, unit, _frozen(ts), _frozen(vals), _frozen(pres),
            _frozen(arr), _frozen(has),
        )

    @classmethod
    def from_points(
        cls, parameter_id: str, points: Iterable[DataPoint], unit: str = ""
    ) -> "Series":
        pts = list(points)
        return cls.from_arrays(
            parameter_id,
            [p.timestamp for p in pts],
            [math.nan if p.value is None else p.value for p in pts],
            present=[p.value is not None for p in pts],
            arrivals=[p.arrival_timestamp or 0 for p in pts],
            has_arrival=[p.arrival_timestamp is not None for p in pts],
            unit=unit,
        )

    def __len__(self) -> int:
        return int(self.timestamps.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Series):
            return NotImplemented
        return (
            self.parameter_id == other.parameter_id
            and self.unit == other.unit
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.present, other.present)
            and np.array_equal(self.values[self.present], other.values[other.present])
            and np.array_equal(self.has_arrival, other.has_arrival)
            and np.array_equal(self.arrivals, other.arrivals)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def points(self) -> tuple[DataPoint, ...]:
        return tuple(
            DataPoint(
                int(t),
                float(v) if p else None,
                int(a) if h else None,
            )
            for t, v, p, a, h in zip(
                self.timestamps, self.values, self.present, self.arrivals, self.has_arrival
            )
        )

    @property
    def present_count(self) -> int:
        return int(np.count_nonzero(self.present))

    def replace(self, **changes) -> "Series":
        """Return a copy with some columns replaced (arrays are re-frozen)."""
        fields = {
            "parameter_id": self.parameter_id,
            "timestamps": self.timestamps,
            "values": self.values,
            "present": self.present,
            "arrivals": self.arrivals,
            "has_arrival": self.has_arrival,
            "unit": self.unit,
        }
        fields.update(changes)
        return Series.from_arrays(**fields)


@dataclass(frozen=True, eq=False)
class Dataset:
    """A collection of series. Series are kept sorted by parameter id so
    every downstream computation sees one canonical order."""

    dataset_id: str
    series: tuple[Series, ...]
    provenance: str = ""

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.series, key=lambda s: s.parameter_id))
        object.__setattr__(self, "series", ordered)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.dataset_id == other.dataset_id and self.series == other.series

    __hash__ = None  # type: ignore[assignment]

    @property
    def parameter_ids(self) -> list[str]:
        return [s.parameter_id for s in self.series]

    def get(self, parameter_id: str) -> Series:
        for s in self.series:
            if s.parameter_id == parameter_id:
                return s
        raise KeyError(parameter_id)

    def __contains__(self, parameter_id: object) -> bool:
        return any(s.parameter_id == parameter_id for s in self.series)

    def with_series(self, *series: Series) -> "Dataset":
        """Copy with the given series replacing (or adding to) existing ones."""
        by_id = {s.parameter_id: s for s in self.series}
        for s in series:
            by_id[s.parameter_id] = s
        return Dataset(self.dataset_id, tuple(by_id.values()), self.provenance)

    @property
    def point_count(self) -> int:
        return sum(len(s) for s in self.series)

    def time_span(self) -> tuple[int, int] | None:
        spans = [(int(s.timestamps[0]), int(s.timestamps[-1])) for s in self.series if len(s)]
        if not spans:
            return None
        return min(a for a, _ in spans), max(b for _, b in spans)


@dataclass(frozen=True)
class ExpectedGrid:
    start: int
    end: int
    interval: int

    def __post_init__(self) -> None:
        if self.interval <= 0:
            raise ValueError(f"grid interval must be positive, got {self.interval}")
        if self.start > self.end:
            raise ValueError(f"grid start {self.start} is after end {self.end}")

    @property
    def size(self) -> int:
        return (self.end - self.start) // self.interval + 1

    def timestamps(self) -> np.ndarray:
        return expected_grid_timestamps(self)


def expected_grid_timestamps(grid: ExpectedGrid) -> np.ndarray:
    """``start, start+interval, ...`` up to and including ``end`` when aligned."""
    return grid.start + grid.interval * np.arange(grid.size, dtype=np.int64)


# --------------------------------------------------------------------- ingest


@dataclass(frozen=True)
class ColumnMapping:
    timestamp: str = "timestamp"
    parameter: str = "parameter"
    value: str = "value"
    arrival: Optional[str] = "arrival_timestamp"


@dataclass
class RowIssue:
    line: int
    message: str


@dataclass
class ParseReport:
    rows_read: int = 0
    rows_accepted: int = 0
    duplicate_rows: int = 0
    null_values: int = 0
    errors: list[RowIssue] = field(default_factory=list)
    warnings: list[RowIssue] = field(default_factory=list)

    @property
    def error_count(self) -> int:
        return len(self.errors)

    @property
    def warning_count(self) -> int:
        return len(self.warnings)

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_accepted": self.rows_accepted,
            "duplicate_rows": self.duplicate_rows,
            "null_values": self.null_values,
            "errors": [{"line": i.line, "message": i.message} for i in self.errors],
            "warnings": [{"line": i.line, "message": i.message} for i in self.warnings],
        }


class _InstantColumn:
    """Parses one timestamp column; the first valid cell fixes the format."""

    def __init__(self, name: str) -> None:
        self.name = name
        self.mode: Optional[str] = None

    def parse(self, raw: object) -> int:
        if isinstance(raw, bool) or raw is None:
            raise ValueError(f"{self.name}: missing or invalid instant {raw!r}")
        if isinstance(raw, float) and raw.is_integer():
            raw = int(raw)
        if isinstance(raw, int):
            mode, text = "integer", None
        else:
            text = str(raw).strip()
            mode = "integer" if is_integer_text(text) else "rfc3339"
        if self.mode is not None and mode != self.mode:
            raise ValueError(
                f"{self.name}: mixed timestamp formats ({self.mode} then {mode})"
            )
        if text is None:
            value = int(raw)  # type: ignore[arg-type]
        else:
            value = int(text) if mode == "integer" else parse_rfc3339(text)
        # only a cell that actually parses fixes the format
        self.mode = mode
        return value


def _parse_value(raw: object) -> tuple[Optional[float], Optional[str]]:
    """Return (value, warning). Absent values come back as None."""
    if raw is None:
        return None, None
    if isinstance(raw, bool):
        return None, f"non-numeric value {raw!r}"
    if isinstance(raw, (int, float)):
        value = float(raw)
    else:
        text = str(raw).strip()
        if text.lower() in _NULL_TOKENS:
            return None, None
        try:
            value = float(text)
        except ValueError:
            return None, f"unparseable value {text!r}"
    if not math.isfinite(value):
        return None, f"non-finite value {raw!r}"
    return value, None


def _iter_csv_rows(text: str, schema: ColumnMapping):
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("input is empty: no header row") from None
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        raise SchemaError(f"duplicate column names in header {header}")
    required = [schema.timestamp, schema.parameter, schema.value]
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"header {header} lacks required column(s) {missing}")
    index = {name: i for i, name in enumerate(header)}
    arrival_col = schema.arrival if schema.arrival in index else None
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            yield line_no, None, f"expected {len(header)} fields, got {len(row)}"
            continue
        yield line_no, {
            "timestamp": row[index[schema.timestamp]],
            "parameter": row[index[schema.parameter]],
            "value": row[index[schema.value]],
            "arrival": row[index[arrival_col]] if arrival_col else None,
        }, None


def _iter_jsonl_rows(text: str, schema: ColumnMapping):
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            yield line_no, None, f"invalid JSON: {exc.msg}"
            continue
        if not isinstance(obj, dict):
            yield line_no, None, "line is not a JSON object"
            continue
        if schema.timestamp not in obj or schema.parameter not in obj:
            yield line_no, None, (
                f"object lacks {schema.timestamp!r} or {schema.parameter!r}"
            )
            continue
        yield line_no, {
            "timestamp": obj[schema.timestamp],
            "parameter": obj[schema.parameter],
            "value": obj.get(schema.value),
            "arrival": obj.get(schema.arrival) if schema.arrival else None,
        }, None


def parse_dataset(
    raw: Union[bytes, str, IO[bytes], IO[str]],
    format: str = "csv",
    schema: ColumnMapping = ColumnMapping(),
    dataset_id: str = "dataset",
    provenance: str = "",
    units: Mapping[str, str] | None = None,
) -> tuple[Dataset, ParseReport]:
    """Parse CSV or JSON-lines input into a :class:`Dataset`.

    Rows with an unparseable timestamp are skipped and recorded as errors.
    Rows repeating an already-seen (parameter, timestamp) are rejected and
    counted as duplicates; they are never merged. Unparseable value cells
    still produce a point, with an absent value and a warning.

    Raises:
        SchemaError: unreadable bytes, missing header or required columns.
        EmptyDatasetError: no row survived parsing.
    """
    if hasattr(raw, "read"):
        raw = raw.read()  # type: ignore[union-attr]
    if isinstance(raw, bytes):
        try:
            text = raw.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise SchemaError(f"input is not valid UTF-8: {exc}") from None
    else:
        text = raw  # type: ignore[assignment]

    if format == "csv":
        rows = _iter_csv_rows(text, schema)
    elif format in ("jsonl", "json-lines", "ndjson"):
        rows = _iter_jsonl_rows(text, schema)
    else:
        raise SchemaError(f"unknown input format {format!r}")

    report = ParseReport()
    ts_col = _InstantColumn("timestamp")
    arr_col = _InstantColumn("arrival_timestamp")
    columns: dict[str, tuple[list, list, list, list, list]] = {}
    seen: set[tuple[str, int]] = set()

    for line_no, row, problem in rows:
        report.rows_read += 1
        if row is None:
            report.errors.append(RowIssue(line_no, problem))
            continue
        parameter = str(row["parameter"]).strip() if row["parameter"] is not None else ""
        if not parameter:
            report.errors.append(RowIssue(line_no, "empty parameter id"))
            continue
        try:
            ts = ts_col.parse(row["timestamp"])
        except ValueError as exc:
            report.errors.append(RowIssue(line_no, str(exc)))
            continue
        key = (parameter, ts)
        if key in seen:
            report.duplicate_rows += 1
            report.errors.append(
                RowIssue(line_no, f"duplicate row for {parameter!r} at {ts}")
            )
            continue
        seen.add(key)

        value, warning = _parse_value(row["value"])
        if warning:
            report.warnings.append(RowIssue(line_no, warning))
        elif value is None:
            report.null_values += 1

        arrival = None
        raw_arrival = row["arrival"]
        if raw_arrival is not None and str(raw_arrival).strip() != "":
            try:
                arrival = arr_col.parse(raw_arrival)
            except ValueError as exc:
                report.warnings.append(RowIssue(line_no, str(exc)))

        cols = columns.setdefault(parameter, ([], [], [], [], []))
        cols[0].append(ts)
        cols[1].append(math.nan if value is None else value)
        cols[2].append(value is not None)
        cols[3].append(0 if arrival is None else arrival)
        cols[4].append(arrival is not None)
        report.rows_accepted += 1

    if not columns:
        raise EmptyDatasetError(
            f"no valid rows ({report.rows_read} read, {report.error_count} rejected)"
        )

    units = units or {}
    series = []
    for parameter, (ts, vals, pres, arr, has) in columns.items():
        ts_arr = np.asarray(ts, dtype=np.int64)
        order = np.argsort(ts_arr, kind="stable")
        series.append(
            Series.from_arrays(
                parameter,
                ts_arr[order],
                np.asarray(vals, dtype=np.float64)[order],
                present=np.asarray(pres, dtype=bool)[order],
                arrivals=np.asarray(arr, dtype=np.int64)[order],
                has_arrival=np.asarray(has, dtype=bool)[order],
                unit=units.get(parameter, ""),
            )
        )
    return Dataset(dataset_id, tuple(series), provenance), report


def serialize_dataset(dataset: Dataset, format: str = "csv") -> str:
    """Canonical text form: series in parameter order, points by timestamp,
    integer-ms instants and shortest round-trip float text."""
    include_arrival = any(bool(s.has_arrival.any()) for s in dataset.series)
    if format == "csv":
        out = io.StringIO(newline="")
        writer = csv.writer(out, lineterminator="\n")
        header = list(CANONICAL_COLUMNS if include_arrival else CANONICAL_COLUMNS[:3])
        writer.writerow(header)
        for s in dataset.series:
            for p in s.points:
                row = [p.timestamp, s.parameter_id, "" if p.value is None else repr(p.value)]
                if include_arrival:
                    row.append("" if p.arrival_timestamp is None else p.arrival_timestamp)
                writer.writerow(row)
        return out.getvalue()
    if format in ("jsonl", "json-lines", "ndjson"):
        lines = []
        for s in dataset.series:
            for p in s.points:
                obj = {"timestamp": p.timestamp, "parameter": s.parameter_id, "value": p.value}
                if include_arrival:
                    obj["arrival_timestamp"] = p.arrival_timestamp
                lines.append(json.dumps(obj))
        return "\n".join(lines) + ("\n" if lines else "")
    raise ValueError(f"unknown output format {format!r}")


# ----------------------------------------------------------------- validation


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    parameter_id: Optional[str] = None
    timestamp: Optional[int] = None


def validate_dataset(dataset: Dataset, clock_skew_ms: int = 0) -> list[Violation]:
    """Return every structural invariant breach; empty means the dataset is
    well formed. Quality defects (gaps, spikes, ...) are not reported here."""
    violations: list[Violation] = []
    if not dataset.series:
        violations.append(Violation("empty-dataset", "dataset has no series"))
    ids = [s.parameter_id for s in dataset.series]
    for pid in sorted({p for p in ids if ids.count(p) > 1}):
        violations.append(
            Violation("duplicate-parameter", f"parameter id {pid!r} repeated", pid)
        )
    for s in dataset.series:
        pid = s.parameter_id
        if len(s) == 0:
            violations.append(Violation("empty-series", f"series {pid!r} has no points", pid))
            continue
        steps = np.diff(s.timestamps)
        for i in np.flatnonzero(steps <= 0):
            ts = int(s.timestamps[i + 1])
            violations.append(
                Violation(
                    "unordered-timestamps",
                    f"timestamp {ts} does not follow {int(s.timestamps[i])}",
                    pid, ts,
                )
            )
        for i in np.flatnonzero(s.present & ~np.isfinite(s.values)):
            ts = int(s.timestamps[i])
            violations.append(
                Violation("non-finite-value", f"value {s.values[i]!r} at {ts}", pid, ts)
            )
        early = s.has_arrival & (s.arrivals < s.timestamps - clock_skew_ms)
        for i in np.flatnonzero(early):
            ts = int(s.timestamps[i])
            violations.append(
                Violation(
                    "arrival-before-generation",
                    f"arrival {int(s.arrivals[i])} precedes timestamp {ts} "
                    f"beyond {clock_skew_ms} ms skew",
                    pid, ts,
                )
            )
    return violations
