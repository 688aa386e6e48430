import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from numq.dataset import (
    ColumnMapping, DataPoint, Dataset, ExpectedGrid, Series, expected_grid_timestamps,
    parse_dataset, serialize_dataset, validate_dataset,
)
from numq.errors import EmptyDatasetError, SchemaError
from numq.timeutil import format_rfc3339, parse_rfc3339


def test_three_rows_one_series():
    raw = b"timestamp,parameter,value\n0,p,1.0\n1000,p,2.0\n2000,p,3.0\n"
    ds, rep = parse_dataset(raw)
    assert ds.parameter_ids == ["p"]
    assert [pt.value for pt in ds.get("p").points] == [1.0, 2.0, 3.0]
    assert rep.rows_accepted == 3 and rep.error_count == 0


def test_unparseable_value_becomes_absent_with_warning():
    raw = b"timestamp,parameter,value\n0,p,abc\n1000,p,2.0\n"
    ds, rep = parse_dataset(raw)
    assert ds.get("p").points[0] == DataPoint(0, None, None)
    assert rep.warning_count == 1


def test_duplicate_row_rejected():
    raw = b"timestamp,parameter,value\n0,p,1.0\n0,p,9.0\n1000,p,2.0\n"
    ds, rep = parse_dataset(raw)
    assert rep.duplicate_rows == 1
    assert [pt.value for pt in ds.get("p").points] == [1.0, 2.0]


def test_malformed_header():
    with pytest.raises(SchemaError):
        parse_dataset(b"time,param,val\n0,p,1\n")
    with pytest.raises(SchemaError):
        parse_dataset(b"")


def test_bad_timestamp_row_skipped():
    raw = b"timestamp,parameter,value\nyesterday,p,1.0\n1000,p,2.0\n"
    ds, rep = parse_dataset(raw)
    assert len(ds.get("p")) == 1
    assert rep.error_count == 1 and rep.errors[0].line == 2


def test_zero_valid_rows():
    with pytest.raises(EmptyDatasetError):
        parse_dataset(b"timestamp,parameter,value\nnope,p,1\n")


def test_non_utf8():
    with pytest.raises(SchemaError):
        parse_dataset(b"timestamp,parameter,value\n0,\xff,1\n")


def test_non_finite_text_is_absent():
    ds, rep = parse_dataset(b"timestamp,parameter,value\n0,p,nan\n1,p,inf\n2,p,1\n")
    assert ds.get("p").present.tolist() == [False, False, True]
    assert rep.warning_count == 2
    assert validate_dataset(ds) == []


def test_rfc3339_and_arrival_columns():
    raw = (
        "timestamp,parameter,value,arrival_timestamp\n"
        "2024-01-01T00:00:01Z,p,1,2024-01-01T00:00:01.250Z\n"
        "2024-01-01T01:00:00+01:00,p,2,\n"
    ).encode()
    ds, rep = parse_dataset(raw)
    s = ds.get("p")
    base = parse_rfc3339("2024-01-01T00:00:00Z")
    assert s.timestamps.tolist() == [base, base + 1000]
    assert s.points[1].arrival_timestamp == base + 1250
    assert s.points[0].arrival_timestamp is None


def test_mixed_timestamp_formats_rejected_per_row():
    raw = b"timestamp,parameter,value\n0,p,1\n2024-01-01T00:00:00Z,p,2\n"
    ds, rep = parse_dataset(raw)
    assert len(ds.get("p")) == 1
    assert "mixed" in rep.errors[0].message


def test_jsonl_and_custom_mapping():
    raw = b'{"t": 5, "sig": "a", "v": 1.5}\n{"t": 1, "sig": "a", "v": null}\nnot json\n'
    ds, rep = parse_dataset(raw, "jsonl", ColumnMapping("t", "sig", "v", None))
    s = ds.get("a")
    assert s.timestamps.tolist() == [1, 5]
    assert s.points[0].value is None and s.points[1].value == 1.5
    assert rep.error_count == 1


def test_series_sorted_and_parameters_ordered():
    raw = b"timestamp,parameter,value\n2000,b,1\n0,b,2\n1000,a,3\n"
    ds, _ = parse_dataset(raw)
    assert ds.parameter_ids == ["a", "b"]
    assert ds.get("b").timestamps.tolist() == [0, 2000]


def test_rfc3339_roundtrip_text():
    assert format_rfc3339(parse_rfc3339("2023-11-14T22:13:20.123Z")) == "2023-11-14T22:13:20.123Z"


_values = st.one_of(st.none(), st.floats(allow_nan=False, allow_infinity=False, width=64))


@st.composite
def datasets(draw, max_params=3, max_points=20):
    n_params = draw(st.integers(1, max_params))
    series = []
    for k in range(n_params):
        ts = sorted(draw(st.sets(st.integers(-10**12, 10**13), min_size=1, max_size=max_points)))
        vals = [draw(_values) for _ in ts]
        arr = [draw(st.one_of(st.none(), st.integers(0, 10**6))) for _ in ts]
        pts = [DataPoint(t, v, None if a is None else t + a) for t, v, a in zip(ts, vals, arr)]
        series.append(Series.from_points(f"p{k}", pts))
    return Dataset("d", tuple(series))


@settings(max_examples=150, deadline=None)
@given(datasets())
def test_csv_roundtrip_identity(ds):
    for fmt in ("csv", "jsonl"):
        text = serialize_dataset(ds, fmt)
        back, rep = parse_dataset(text.encode(), fmt, dataset_id="d")
        assert back == ds
        assert rep.error_count == 0
        assert serialize_dataset(back, fmt) == text


def test_validate_well_formed(identity):
    ds, _ = identity
    assert validate_dataset(ds) == []


def test_validate_nan_value():
    s = Series.from_arrays("p", [0, 1, 2], [1.0, math.nan, 3.0], present=[True, True, True])
    v = validate_dataset(Dataset("d", (s,)))
    assert len(v) == 1
    assert (v[0].kind, v[0].parameter_id, v[0].timestamp) == ("non-finite-value", "p", 1)


def test_validate_zero_series():
    assert len(validate_dataset(Dataset("d", ()))) == 1


def test_validate_unordered_and_empty_series():
    s = Series.from_arrays("p", [0, 5, 5, 3], [1.0, 2.0, 3.0, 4.0])
    e = Series.from_arrays("q", [], [])
    kinds = [v.kind for v in validate_dataset(Dataset("d", (s, e)))]
    assert kinds.count("unordered-timestamps") == 2
    assert kinds.count("empty-series") == 1


def test_validate_early_arrival_respects_skew():
    s = Series.from_arrays("p", [1000], [1.0], arrivals=[900])
    assert [v.kind for v in validate_dataset(Dataset("d", (s,)))] == ["arrival-before-generation"]
    assert validate_dataset(Dataset("d", (s,)), clock_skew_ms=100) == []


def test_series_arrays_are_read_only(identity):
    ds, _ = identity
    with pytest.raises(ValueError):
        ds.series[0].values[0] = 1.0


@pytest.mark.parametrize(
    "start,end,interval,expected",
    [
        (0, 4000, 1000, [0, 1000, 2000, 3000, 4000]),
        (0, 0, 1000, [0]),
        (0, 2500, 1000, [0, 1000, 2000]),
    ],
)
def test_grid_examples(start, end, interval, expected):
    g = ExpectedGrid(start, end, interval)
    assert expected_grid_timestamps(g).tolist() == expected
    assert g.size == len(expected)


def test_grid_length_formula_random_triples():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        start = int(rng.integers(-10**12, 10**12))
        end = start + int(rng.integers(0, 10**6))
        interval = int(rng.integers(1, 10**5))
        ts = expected_grid_timestamps(ExpectedGrid(start, end, interval))
        assert len(ts) == (end - start) // interval + 1
        assert ts[0] == start and ts[-1] <= end < ts[-1] + interval


def test_grid_invalid():
    with pytest.raises(ValueError):
        ExpectedGrid(0, 10, 0)
    with pytest.raises(ValueError):
        ExpectedGrid(10, 0, 1)
