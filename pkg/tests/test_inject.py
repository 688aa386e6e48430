import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from numq.dataset import Dataset, Series, serialize_dataset, validate_dataset
from numq.errors import InjectionError
from numq.inject import KINDS, AntipatternSpec, inject_antipattern
from numq.synthetic import identity_dataset


def ten_points(value=5.0):
    ts = np.arange(10, dtype=np.int64) * 1000
    return Dataset("d", (Series.from_arrays("p", ts, np.full(10, value), arrivals=ts + 100),))


def test_gap_removes_slots():
    ds = ten_points()
    out, ann = inject_antipattern(ds, AntipatternSpec("gap", "p", {"slots": [3, 7]}))
    assert len(out.get("p")) == 8
    assert ann.changes["removed"] == [3, 7]
    assert ann.changes["timestamps"] == [3000, 7000]
    assert 3000 not in out.get("p").timestamps


def test_spike_on_constant_series():
    out, ann = inject_antipattern(ten_points(), AntipatternSpec("spike", "p", {"magnitude": 495.0, "slots": [4]}))
    assert out.get("p").values[4] == 500.0
    assert ann.changes["slots"] == [4]


def test_bias_and_drift():
    out, _ = inject_antipattern(ten_points(), AntipatternSpec("bias", "p", {"offset": 2.0, "start": 2, "end": 5}))
    assert out.get("p").values.tolist() == [5.0] * 2 + [7.0] * 3 + [5.0] * 5
    out, ann = inject_antipattern(ten_points(), AntipatternSpec("drift", "p", {"rate": 0.001}))
    assert out.get("p").values.tolist() == [5.0 + k for k in range(10)]
    assert ann.changes["origin"] == 0


def test_duplicate_subset_copies_window():
    out, ann = inject_antipattern(ten_points(), AntipatternSpec("duplicate-subset", "p", {"start": 2, "length": 4}))
    copy = out.get("p_copy")
    assert copy.timestamps.tolist() == [2000, 3000, 4000, 5000]
    assert ann.changes["target"] == "p_copy"
    with pytest.raises(InjectionError):
        inject_antipattern(out, AntipatternSpec("duplicate-subset", "p", {"length": 2}))


def test_stale_prepends_old_points():
    out, ann = inject_antipattern(ten_points(), AntipatternSpec("stale", "p", {"count": 3, "age_ms": 50_000}))
    s = out.get("p")
    assert len(s) == 13
    assert s.timestamps[:3].tolist() == [-52_000, -51_000, -50_000]
    assert ann.changes["timestamps"] == [-52_000, -51_000, -50_000]


def test_delay_and_rule_breach():
    out, _ = inject_antipattern(ten_points(), AntipatternSpec("delay", "p", {"delay_ms": 9000, "slots": [1]}))
    assert out.get("p").arrivals[1] == 10_000
    assert out.get("p").arrivals[0] == 100
    out, _ = inject_antipattern(ten_points(), AntipatternSpec("rule-breach", "p", {"value": -1.0, "slots": [0, 9]}))
    assert out.get("p").values[[0, 9]].tolist() == [-1.0, -1.0]


def test_unknown_parameter_and_kind():
    with pytest.raises(InjectionError):
        inject_antipattern(ten_points(), AntipatternSpec("gap", "nope"))
    with pytest.raises(InjectionError):
        AntipatternSpec("meteor", "p")


def test_gap_longer_than_series():
    with pytest.raises(InjectionError):
        inject_antipattern(ten_points(), AntipatternSpec("gap", "p", {"start": 0, "length": 10}))
    with pytest.raises(InjectionError):
        inject_antipattern(ten_points(), AntipatternSpec("gap", "p", {"start": 5, "length": 6}))


def test_input_not_modified():
    ds = ten_points()
    before = serialize_dataset(ds)
    for kind in KINDS:
        params = {"magnitude": 1.0, "offset": 1.0, "rate": 1e-3, "length": 2, "age_ms": 10, "delay_ms": 5}
        inject_antipattern(ds, AntipatternSpec(kind, "p", params, seed=3))
    assert serialize_dataset(ds) == before


def test_seeded_random_slots_are_deterministic():
    ds = identity_dataset(200)
    a = inject_antipattern(ds, AntipatternSpec("gap", "flow", {"count": 17}, seed=11))
    b = inject_antipattern(ds, AntipatternSpec("gap", "flow", {"count": 17}, seed=11))
    c = inject_antipattern(ds, AntipatternSpec("gap", "flow", {"count": 17}, seed=12))
    assert serialize_dataset(a[0]) == serialize_dataset(b[0])
    assert a[1].to_json() == b[1].to_json()
    assert a[1].changes["removed"] != c[1].changes["removed"]


_PARAMS = {
    "gap": {"count": 3},
    "spike": {"magnitude": 100.0, "count": 2},
    "bias": {"offset": 1.5, "start": 4, "end": 20},
    "drift": {"rate": 1e-6},
    "duplicate-subset": {"start": 5, "length": 16},
    "stale": {"count": 4, "age_ms": 86_400_000},
    "delay": {"delay_ms": 60_000, "count": 5},
    "rule-breach": {"value": 5000.0, "count": 2},
}


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(KINDS), st.integers(0, 2**32 - 1), st.sampled_from(["flow", "pressure"]))
def test_injection_introduces_no_structural_violations(kind, seed, parameter):
    ds = identity_dataset(64)
    out, _ = inject_antipattern(ds, AntipatternSpec(kind, parameter, _PARAMS[kind], seed))
    assert validate_dataset(out) == []
