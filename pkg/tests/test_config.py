import json

import pytest

from numq.config import build_config, load_config, load_policy
from numq.errors import ConfigError
from numq.evaluate import evaluate_all
from numq.gate import GatePolicy, PolicyEntry
from numq.metrics import Window
from numq.synthetic import config_document, identity_config, identity_dataset, write_fixture


def test_fixture_config_matches_programmatic(tmp_path):
    paths = write_fixture(tmp_path, 100)
    loaded = load_config(paths["config"])
    ds = identity_dataset(100)
    assert loaded.evaluation.fingerprint() == identity_config(ds).fingerprint()
    assert loaded.units == {"flow": "m3/h", "pressure": "bar", "temperature": "degC"}
    assert loaded.policy.entry_for("flow", "completeness").impact == 3
    rep_a = evaluate_all(ds, loaded.evaluation)
    rep_b = evaluate_all(ds, identity_config(ds))
    assert rep_a.to_json() == rep_b.to_json()


def test_rfc3339_instants_and_precision_window():
    cfg = build_config({
        "as_of": "2024-01-01T00:00:00Z",
        "grid": {"start": "2023-12-31T23:00:00Z", "end": "2024-01-01T00:00:00Z", "interval_ms": 60_000},
        "precision": {"grouping": "window", "window_ms": 10_000},
        "defaults": {"precision_threshold": 0.1},
    }).evaluation
    assert cfg.as_of == 1_704_067_200_000
    assert cfg.grid.size == 61
    assert cfg.precision_grouping == Window(10_000)


@pytest.mark.parametrize(
    "patch,location",
    [
        ({"uniqueness_window": 0}, "uniqueness_window"),
        ({"defaults": {"tolerance": -1}}, "defaults.tolerance"),
        ({"grid": {"start": 0, "end": 10, "interval_ms": 0}}, "grid.interval_ms"),
        ({"rules": [{"id": "r", "type": "range"}, {"id": "r", "type": "range"}]}, "rules"),
        ({"rules": [{"id": "x", "type": "expression", "expression": "import os"}]}, "rules"),
        ({"surprise": 1}, "surprise"),
        ({"gate": {"entries": [{"dimension": "beauty"}]}}, "gate"),
    ],
)
def test_invalid_config_reports_location(patch, location):
    with pytest.raises(ConfigError) as exc:
        build_config(patch)
    assert location in str(exc.value)


def test_missing_reference_csv(tmp_path):
    doc = config_document(10, reference_csv="absent.csv")
    with pytest.raises(ConfigError) as exc:
        build_config(doc, tmp_path)
    assert "reference_csv" in str(exc.value)


def test_load_policy_forms(tmp_path):
    full = tmp_path / "full.json"
    full.write_text(json.dumps(config_document(10)))
    assert load_policy(full).entry_for("a", "accuracy").impact == 3
    bare = tmp_path / "bare.json"
    bare.write_text(json.dumps({"default": {"impact": "low", "low": 0.5, "high": 0.6}}))
    assert load_policy(bare) == GatePolicy({}, PolicyEntry(1, 0.5, 0.6))
    none = tmp_path / "none.json"
    none.write_text("{}")
    assert load_policy(none) == GatePolicy()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"gate": {"default": {"low": 2}}}))
    with pytest.raises(ConfigError):
        load_policy(bad)


def test_fingerprint_ignores_as_of():
    a = build_config({"as_of": 1, "defaults": {"freshness_horizon_ms": 10}}).evaluation
    b = build_config({"as_of": 2, "defaults": {"freshness_horizon_ms": 10}}).evaluation
    c = build_config({"as_of": 2, "defaults": {"freshness_horizon_ms": 11}}).evaluation
    assert a.fingerprint() == b.fingerprint() != c.fingerprint()
