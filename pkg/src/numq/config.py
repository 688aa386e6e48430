"""Configuration documents (JSON) for evaluation and gating.

Example::

    {
      "dataset_id": "well-7",
      "as_of": "2024-03-01T00:00:00Z",
      "grid": {"start": 0, "end": 3600000, "interval_ms": 1000},
      "defaults": {"tolerance": 0.05, "precision_threshold": 0.5},
      "parameters": {
        "pressure": {"unit": "bar", "freshness_horizon_ms": 86400000, "delay_budget_ms": 5000}
      },
      "reference_csv": "truth.csv",
      "rules": [{"id": "p-range", "scope": "pressure", "type": "range", "min": 0, "max": 400}],
      "gate": {"default": {"impact": "medium", "low": 0.8, "high": 0.95}}
    }

Relative paths inside the document resolve against the document's folder.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .dataset import ExpectedGrid, parse_dataset
from .errors import ConfigError, NumqError
from .evaluate import DetectorSettings, EvaluationConfig
from .gate import GatePolicy
from .metrics import (
    Consecutive, LatencyLog, ParameterReference, ReferenceValues, Window,
)
from .rules import Expression, MaxDecimalPlaces, MonotoneNondecreasing, RangeCheck, Rule, UnitEquals
from .timeutil import parse_instant

Instant = Union[int, str]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridModel(_Model):
    start: Instant
    end: Instant
    interval_ms: int = Field(gt=0)


class ParameterModel(_Model):
    unit: Optional[str] = None
    tolerance: Optional[float] = Field(default=None, ge=0)
    distance_mode: Optional[Literal["absolute", "relative"]] = None
    freshness_horizon_ms: Optional[int] = Field(default=None, gt=0)
    delay_budget_ms: Optional[int] = Field(default=None, ge=0)
    precision_threshold: Optional[float] = Field(default=None, ge=0)
    true_values: Optional[list[tuple[Instant, float]]] = None


class RuleModel(_Model):
    id: str
    scope: str = "*"
    type: Literal["range", "max_decimal_places", "unit_equals", "monotone_nondecreasing", "expression"]
    min: Optional[float] = None
    max: Optional[float] = None
    places: Optional[int] = Field(default=None, ge=0)
    unit: Optional[str] = None
    expression: Optional[str] = None


class PrecisionModel(_Model):
    grouping: Literal["consecutive", "window"] = "consecutive"
    window_ms: Optional[int] = Field(default=None, gt=0)


class AccessibilityModel(_Model):
    manifest: Optional[list[tuple[str, Instant]]] = None
    latency_log: Optional[Union[str, list[tuple[str, Instant, int]]]] = None
    latency_budget_ms: Optional[int] = Field(default=None, ge=0)


class DetectorModel(_Model):
    z_threshold: float = Field(default=3.5, gt=0)
    bias_threshold: Optional[float] = Field(default=None, ge=0)
    drift_threshold: Optional[float] = Field(default=None, ge=0)


class GateEntryModel(_Model):
    parameter: str = "*"
    dimension: str = "*"
    impact: Optional[Union[Literal["low", "medium", "high"], Literal[1, 2, 3]]] = None
    low: Optional[float] = Field(default=None, ge=0, le=1)
    high: Optional[float] = Field(default=None, ge=0, le=1)


class GateDefaultModel(_Model):
    impact: Union[Literal["low", "medium", "high"], Literal[1, 2, 3]] = "medium"
    low: float = Field(default=0.80, ge=0, le=1)
    high: float = Field(default=0.95, ge=0, le=1)


class GateModel(_Model):
    default: GateDefaultModel = GateDefaultModel()
    entries: list[GateEntryModel] = []


class ConfigModel(_Model):
    dataset_id: Optional[str] = None
    as_of: Optional[Instant] = None
    grid: Optional[GridModel] = None
    defaults: ParameterModel = ParameterModel()
    parameters: dict[str, ParameterModel] = {}
    reference_csv: Optional[str] = None
    rules: list[RuleModel] = []
    uniqueness_window: int = Field(default=16, ge=1)
    precision: PrecisionModel = PrecisionModel()
    currency_granularity: Literal["point", "series"] = "point"
    accessibility: AccessibilityModel = AccessibilityModel()
    detectors: DetectorModel = DetectorModel()
    clock_skew_ms: int = Field(default=0, ge=0)
    gate: Optional[GateModel] = None

    @field_validator("defaults")
    @classmethod
    def _no_default_truth(cls, v: ParameterModel) -> ParameterModel:
        if v.true_values is not None:
            raise ValueError("true_values belong to a specific parameter, not defaults")
        return v


class LoadedConfig:
    """Result of :func:`load_config`."""

    def __init__(self, evaluation: EvaluationConfig, policy: Optional[GatePolicy],
                 dataset_id: Optional[str], units: dict[str, str]) -> None:
        self.evaluation = evaluation
        self.policy = policy
        self.dataset_id = dataset_id
        self.units = units


def _instant(value: Instant, where: str) -> int:
    try:
        return parse_instant(value)
    except ValueError as exc:
        raise ConfigError(str(exc), where) from None


def _rule(m: RuleModel, where: str) -> Rule:
    try:
        if m.type == "range":
            if m.min is None and m.max is None:
                raise ValueError("range rule needs min and/or max")
            pred = RangeCheck(m.min, m.max)
        elif m.type == "max_decimal_places":
            if m.places is None:
                raise ValueError("max_decimal_places rule needs 'places'")
            pred = MaxDecimalPlaces(m.places)
        elif m.type == "unit_equals":
            if m.unit is None:
                raise ValueError("unit_equals rule needs 'unit'")
            pred = UnitEquals(m.unit)
        elif m.type == "monotone_nondecreasing":
            pred = MonotoneNondecreasing()
        else:
            if not m.expression:
                raise ValueError("expression rule needs 'expression'")
            pred = Expression(m.expression)
    except ValueError as exc:
        raise ConfigError(str(exc), where) from None
    return Rule(m.id, pred, m.scope)


def _read_latency_csv(path: Path, where: str) -> list[tuple[str, int, int]]:
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            rows = []
            for row in reader:
                rows.append((row["parameter"], parse_instant(row["timestamp"]), int(row["latency_ms"])))
            return rows
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read latency log {path}: {exc}", where) from None


def _reference_from_csv(path: Path) -> dict[str, ReferenceValues]:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read reference file {path}: {exc}", "reference_csv") from None
    fmt = "jsonl" if path.suffix in (".jsonl", ".ndjson") else "csv"
    try:
        ds, _ = parse_dataset(raw, fmt)
    except NumqError as exc:
        raise ConfigError(f"reference file {path}: {exc}", "reference_csv") from None
    return {s.parameter_id: ReferenceValues.from_series(s) for s in ds.series}


def build_config(data: Any, base_dir: Path = Path(".")) -> LoadedConfig:
    """Validate a parsed configuration document and build domain objects."""
    try:
        model = ConfigModel.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = ".".join(str(p) for p in err["loc"])
        raise ConfigError(err["msg"], loc) from None

    truth: dict[str, ReferenceValues] = {}
    if model.reference_csv:
        truth.update(_reference_from_csv(base_dir / model.reference_csv))

    defaults = model.defaults

    def reference(pm: ParameterModel, where: str, pid: Optional[str]) -> ParameterReference:
        def pick(name):
            v = getattr(pm, name)
            return getattr(defaults, name) if v is None else v

        values = truth.get(pid) if pid is not None else None
        if pm.true_values is not None:
            try:
                values = ReferenceValues.from_pairs(
                    (_instant(t, f"{where}.true_values"), v) for t, v in pm.true_values
                )
            except ValueError as exc:
                raise ConfigError(str(exc), f"{where}.true_values") from None
        try:
            return ParameterReference(
                true_values=values,
                tolerance=pick("tolerance") or 0.0,
                distance_mode=pick("distance_mode") or "absolute",
                freshness_horizon_ms=pick("freshness_horizon_ms"),
                delay_budget_ms=pick("delay_budget_ms"),
                precision_threshold=pick("precision_threshold"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc), where) from None

    references = {
        pid: reference(pm, f"parameters.{pid}", pid) for pid, pm in model.parameters.items()
    }
    for pid in truth:
        if pid not in references:
            references[pid] = reference(ParameterModel(), f"reference_csv[{pid}]", pid)

    grid = None
    if model.grid is not None:
        try:
            grid = ExpectedGrid(
                _instant(model.grid.start, "grid.start"),
                _instant(model.grid.end, "grid.end"),
                model.grid.interval_ms,
            )
        except ValueError as exc:
            raise ConfigError(str(exc), "grid") from None

    if model.precision.grouping == "window":
        if model.precision.window_ms is None:
            raise ConfigError("window grouping needs window_ms", "precision.window_ms")
        grouping = Window(model.precision.window_ms)
    else:
        grouping = Consecutive()

    acc = model.accessibility
    manifest = None
    if acc.manifest is not None:
        grouped: dict[str, list[int]] = {}
        for i, (pid, ts) in enumerate(acc.manifest):
            grouped.setdefault(pid, []).append(_instant(ts, f"accessibility.manifest.{i}"))
        manifest = {pid: np.array(sorted(v), dtype=np.int64) for pid, v in grouped.items()}
    latency = None
    if acc.latency_log is not None:
        if acc.latency_budget_ms is None:
            raise ConfigError("a latency log needs latency_budget_ms", "accessibility.latency_budget_ms")
        if isinstance(acc.latency_log, str):
            records = _read_latency_csv(base_dir / acc.latency_log, "accessibility.latency_log")
        else:
            records = [
                (pid, _instant(ts, f"accessibility.latency_log.{i}"), lat)
                for i, (pid, ts, lat) in enumerate(acc.latency_log)
            ]
        latency = LatencyLog(records)

    evaluation = EvaluationConfig(
        references=references,
        default_reference=reference(ParameterModel(), "defaults", None),
        rules=tuple(_rule(r, f"rules.{i}") for i, r in enumerate(model.rules)),
        grid=grid,
        as_of=None if model.as_of is None else _instant(model.as_of, "as_of"),
        uniqueness_window=model.uniqueness_window,
        precision_grouping=grouping,
        currency_granularity=model.currency_granularity,
        manifest=manifest,
        latency_log=latency,
        latency_budget_ms=acc.latency_budget_ms,
        clock_skew_ms=model.clock_skew_ms,
        detectors=DetectorSettings(
            model.detectors.z_threshold, model.detectors.bias_threshold,
            model.detectors.drift_threshold,
        ),
    )

    policy = None
    if model.gate is not None:
        try:
            policy = GatePolicy.from_dict(model.gate.model_dump(exclude_none=True))
        except ValueError as exc:
            raise ConfigError(str(exc), "gate") from None

    units = {pid: pm.unit for pid, pm in model.parameters.items() if pm.unit is not None}
    return LoadedConfig(evaluation, policy, model.dataset_id, units)


def load_config(path: Path | str) -> LoadedConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") from None
    return build_config(data, path.parent)


def load_policy(path: Path | str) -> GatePolicy:
    """Read a gate policy: either a full config document with a ``gate``
    section or a bare policy object."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read policy: {exc}", str(path)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") from None
    if not isinstance(data, dict):
        raise ConfigError("policy document must be an object", str(path))
    section = data.get("gate", data if ("default" in data or "entries" in data) else None)
    if section is None:
        return GatePolicy()
    try:
        model = GateModel.model_validate(section)
        return GatePolicy.from_dict(model.model_dump(exclude_none=True))
    except ValidationError as exc:
        err = exc.errors()[0]
        raise ConfigError(err["msg"], "gate." + ".".join(str(p) for p in err["loc"])) from None
    except ValueError as exc:
        raise ConfigError(str(exc), "gate") from None
