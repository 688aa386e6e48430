"""Clean synthetic datasets to inject antipatterns into.

The identity fixture is built so that every dimension scores exactly 1:
values sit on the expected grid, equal their reference, arrive within
budget, are fresh at ``as_of``, and pass every rule. Values are multiples
of 1/64 so that integer spikes and offsets stay exactly representable and
never disturb the decimal-places rule by accident.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import Dataset, ExpectedGrid, Series, serialize_dataset
from .evaluate import DetectorSettings, EvaluationConfig
from .metrics import ParameterReference, ReferenceValues
from .rules import MaxDecimalPlaces, RangeCheck, Rule, UnitEquals

START = 1_700_000_000_000
INTERVAL = 1_000
ARRIVAL_DELAY = 200
HOUR = 3_600_000

PARAMETERS = {
    # id: (unit, base, amplitude)
    "flow": ("m3/h", 5.0, 0.5),
    "pressure": ("bar", 50.0, 2.0),
    "temperature": ("degC", 120.0, 1.0),
}

TOLERANCE = 0.05
PRECISION_THRESHOLD = 0.5
FRESHNESS_HORIZON = 24 * HOUR
DELAY_BUDGET = 5_000
DRIFT_THRESHOLD = 1e-6  # value units per ms
DECIMAL_PLACES = 14
PERIOD = 100  # points per sinusoid cycle


def identity_values(n: int, base: float, amplitude: float) -> np.ndarray:
    # mirror-symmetric about the middle point, so the least-squares slope is
    # zero at any length and the drift detector stays quiet
    offset = np.abs(np.arange(n) - (n - 1) / 2)
    wave = np.cos(2 * np.pi * offset / PERIOD)
    return base + np.round(amplitude * wave * 64) / 64


def identity_dataset(points: int = 1000, parameters: dict | None = None,
                     dataset_id: str = "identity") -> Dataset:
    parameters = PARAMETERS if parameters is None else parameters
    ts = START + INTERVAL * np.arange(points, dtype=np.int64)
    series = [
        Series.from_arrays(pid, ts, identity_values(points, base, amp),
                           arrivals=ts + ARRIVAL_DELAY, unit=unit)
        for pid, (unit, base, amp) in parameters.items()
    ]
    return Dataset(dataset_id, tuple(series), "numq.synthetic identity fixture")


def identity_grid(points: int = 1000) -> ExpectedGrid:
    return ExpectedGrid(START, START + INTERVAL * (points - 1), INTERVAL)


def identity_as_of(points: int = 1000) -> int:
    return START + INTERVAL * points


def identity_rules(parameters: dict | None = None) -> tuple[Rule, ...]:
    parameters = PARAMETERS if parameters is None else parameters
    rules = [Rule("range", RangeCheck(-1000.0, 1000.0)),
             Rule("decimals", MaxDecimalPlaces(DECIMAL_PLACES))]
    rules += [Rule(f"{pid}-unit", UnitEquals(unit), pid) for pid, (unit, _, _) in parameters.items()]
    return tuple(rules)


def identity_config(dataset: Dataset, points: int | None = None) -> EvaluationConfig:
    """Config under which ``dataset`` (as built by :func:`identity_dataset`)
    scores 1.0 everywhere. Reference values are taken from the dataset."""
    if points is None:
        points = max(len(s) for s in dataset.series)
    defaults = dict(
        tolerance=TOLERANCE,
        freshness_horizon_ms=FRESHNESS_HORIZON,
        delay_budget_ms=DELAY_BUDGET,
        precision_threshold=PRECISION_THRESHOLD,
    )
    refs = {
        s.parameter_id: ParameterReference(true_values=ReferenceValues.from_series(s), **defaults)
        for s in dataset.series
    }
    units = {s.parameter_id: s.unit for s in dataset.series}
    return EvaluationConfig(
        references=refs,
        default_reference=ParameterReference(**defaults),
        rules=identity_rules({pid: (u, 0, 0) for pid, u in units.items()}),
        grid=identity_grid(points),
        as_of=identity_as_of(points),
        detectors=DetectorSettings(drift_threshold=DRIFT_THRESHOLD),
    )


def config_document(points: int = 1000, reference_csv: str = "truth.csv") -> dict:
    """JSON config equivalent to :func:`identity_config`, for the CLI."""
    return {
        "dataset_id": "identity",
        "as_of": identity_as_of(points),
        "grid": {"start": START, "end": START + INTERVAL * (points - 1), "interval_ms": INTERVAL},
        "defaults": {
            "tolerance": TOLERANCE,
            "freshness_horizon_ms": FRESHNESS_HORIZON,
            "delay_budget_ms": DELAY_BUDGET,
            "precision_threshold": PRECISION_THRESHOLD,
        },
        "parameters": {pid: {"unit": unit} for pid, (unit, _, _) in PARAMETERS.items()},
        "reference_csv": reference_csv,
        "rules": [
            {"id": "range", "type": "range", "min": -1000.0, "max": 1000.0},
            {"id": "decimals", "type": "max_decimal_places", "places": DECIMAL_PLACES},
        ] + [
            {"id": f"{pid}-unit", "scope": pid, "type": "unit_equals", "unit": unit}
            for pid, (unit, _, _) in PARAMETERS.items()
        ],
        "detectors": {"drift_threshold": DRIFT_THRESHOLD},
        "gate": {
            "default": {"impact": "medium", "low": 0.8, "high": 0.95},
            "entries": [
                {"parameter": "*", "dimension": "completeness", "impact": "high"},
                {"parameter": "*", "dimension": "accuracy", "impact": "high"},
            ],
        },
    }


def write_fixture(directory: Path | str, points: int = 1000) -> dict[str, Path]:
    """Write data.csv, truth.csv and config.json for the identity fixture."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ds = identity_dataset(points)
    paths = {
        "data": directory / "data.csv",
        "truth": directory / "truth.csv",
        "config": directory / "config.json",
    }
    paths["data"].write_text(serialize_dataset(ds), encoding="utf-8")
    truth = Dataset(ds.dataset_id, tuple(s.replace(has_arrival=np.zeros(len(s), bool)) for s in ds.series))
    paths["truth"].write_text(serialize_dataset(truth), encoding="utf-8")
    paths["config"].write_text(
        json.dumps(config_document(points), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return paths
