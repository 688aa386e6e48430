"""Synthetic antipattern injection.

Every injection returns a new dataset plus an annotation describing exactly
what changed, so the result can serve as ground truth for metrics and
detectors. The input dataset is never modified. Slot indices refer to
positions in the target series (0-based).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .dataset import Dataset, Series
from .errors import InjectionError

KINDS = (
    "gap", "spike", "bias", "drift", "duplicate-subset", "stale", "delay", "rule-breach",
)


@dataclass(frozen=True)
class AntipatternSpec:
    kind: str
    parameter: str
    parameters: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InjectionError(f"unknown antipattern kind {self.kind!r}; expected one of {KINDS}")

    @classmethod
    def from_dict(cls, data: dict) -> "AntipatternSpec":
        if not isinstance(data, dict):
            raise InjectionError("antipattern spec must be a JSON object")
        try:
            kind = data["kind"]
            parameter = data["parameter"]
        except KeyError as exc:
            raise InjectionError(f"antipattern spec lacks {exc.args[0]!r}") from None
        params = data.get("parameters", {})
        if not isinstance(params, dict):
            raise InjectionError("'parameters' must be an object")
        seed = data.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise InjectionError("'seed' must be an integer")
        return cls(str(kind), str(parameter), dict(params), seed)


@dataclass(frozen=True)
class Annotation:
    kind: str
    parameter: str
    seed: int
    changes: dict[str, Any]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "parameter": self.parameter,
            "seed": self.seed,
            "changes": self.changes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _int_param(params: dict, name: str, default: Any = None, minimum: int | None = None) -> int:
    value = params.get(name, default)
    if value is None:
        raise InjectionError(f"parameter {name!r} is required")
    if isinstance(value, bool) or not isinstance(value, int):
        raise InjectionError(f"parameter {name!r} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise InjectionError(f"parameter {name!r} must be >= {minimum}, got {value}")
    return value


def _float_param(params: dict, name: str, default: Any = None) -> float:
    value = params.get(name, default)
    if value is None:
        raise InjectionError(f"parameter {name!r} is required")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InjectionError(f"parameter {name!r} must be a number, got {value!r}")
    if not np.isfinite(value):
        raise InjectionError(f"parameter {name!r} must be finite")
    return float(value)


def _select_slots(params: dict, n: int, rng: np.random.Generator) -> list[int]:
    """Resolve ``slots`` (explicit), ``start``+``length`` (contiguous) or
    ``count`` (random, seeded) into sorted distinct slot indices."""
    if "slots" in params:
        slots = params["slots"]
        if not isinstance(slots, list) or not slots:
            raise InjectionError("'slots' must be a non-empty list of indices")
        for s in slots:
            if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < n:
                raise InjectionError(f"slot {s!r} outside series of {n} points")
        if len(set(slots)) != len(slots):
            raise InjectionError("'slots' contains repeated indices")
        return sorted(slots)
    if "length" in params:
        length = _int_param(params, "length", minimum=1)
        start = _int_param(params, "start", 0, minimum=0)
        if start + length > n:
            raise InjectionError(
                f"range [{start}, {start + length}) longer than series of {n} points"
            )
        return list(range(start, start + length))
    count = _int_param(params, "count", 1, minimum=1)
    if count > n:
        raise InjectionError(f"count {count} exceeds series of {n} points")
    return sorted(int(i) for i in rng.choice(n, size=count, replace=False))


def _present_slots(series: Series, slots: list[int]) -> None:
    absent = [s for s in slots if not series.present[s]]
    if absent:
        raise InjectionError(f"slots {absent} have no value to modify")


def _gap(series, params, rng):
    if len(series) == 0:
        raise InjectionError("cannot cut a gap in an empty series")
    slots = _select_slots(params, len(series), rng)
    if len(slots) >= len(series):
        raise InjectionError(
            f"gap of {len(slots)} slots is not shorter than series of {len(series)}"
        )
    keep = np.ones(len(series), dtype=bool)
    keep[slots] = False
    new = series.replace(
        timestamps=series.timestamps[keep],
        values=series.values[keep],
        present=series.present[keep],
        arrivals=series.arrivals[keep],
        has_arrival=series.has_arrival[keep],
    )
    return [new], {
        "removed": slots,
        "timestamps": [int(series.timestamps[s]) for s in slots],
    }


def _offset_slots(series, slots, offsets):
    values = series.values.copy()
    values[slots] = values[slots] + offsets
    return series.replace(values=values)


def _spike(series, params, rng):
    magnitude = _float_param(params, "magnitude")
    slots = _select_slots(params, len(series), rng)
    _present_slots(series, slots)
    new = _offset_slots(series, slots, magnitude)
    return [new], {
        "slots": slots,
        "timestamps": [int(series.timestamps[s]) for s in slots],
        "magnitude": magnitude,
        "values": [float(new.values[s]) for s in slots],
    }


def _range_slots(params, n):
    start = _int_param(params, "start", 0, minimum=0)
    end = _int_param(params, "end", n, minimum=start + 1)
    if end > n:
        raise InjectionError(f"range end {end} beyond series of {n} points")
    return start, end


def _bias(series, params, rng):
    offset = _float_param(params, "offset")
    start, end = _range_slots(params, len(series))
    idx = np.arange(start, end)
    idx = idx[series.present[idx]]
    new = _offset_slots(series, idx, offset)
    return [new], {
        "start": start,
        "end": end,
        "offset": offset,
        "time_range": [int(series.timestamps[start]), int(series.timestamps[end - 1])],
    }


def _drift(series, params, rng):
    rate = _float_param(params, "rate")
    start, end = _range_slots(params, len(series))
    idx = np.arange(start, end)
    idx = idx[series.present[idx]]
    t0 = int(series.timestamps[start])
    offsets = rate * (series.timestamps[idx] - t0).astype(np.float64)
    new = _offset_slots(series, idx, offsets)
    return [new], {
        "start": start,
        "end": end,
        "rate": rate,
        "origin": t0,
        "time_range": [t0, int(series.timestamps[end - 1])],
        "offsets": [float(o) for o in offsets],
    }


def _duplicate_subset(series, params, rng, dataset: Dataset):
    start = _int_param(params, "start", 0, minimum=0)
    length = _int_param(params, "length", minimum=1)
    if start + length > len(series):
        raise InjectionError(
            f"window [{start}, {start + length}) longer than series of {len(series)} points"
        )
    target = params.get("target", f"{series.parameter_id}_copy")
    if not isinstance(target, str) or not target:
        raise InjectionError("'target' must be a non-empty parameter id")
    if target in dataset:
        raise InjectionError(f"target parameter {target!r} already exists")
    sl = slice(start, start + length)
    copy = Series.from_arrays(
        target,
        series.timestamps[sl],
        series.values[sl],
        present=series.present[sl],
        arrivals=series.arrivals[sl],
        has_arrival=series.has_arrival[sl],
        unit=series.unit,
    )
    return [copy], {
        "source": series.parameter_id,
        "target": target,
        "start": start,
        "length": length,
        "time_range": [int(series.timestamps[start]), int(series.timestamps[start + length - 1])],
    }


def _stale(series, params, rng):
    """Prepend ``count`` old points, ``age_ms`` before the first one."""
    if len(series) == 0 or not series.present[0]:
        raise InjectionError("stale injection needs a first point with a value")
    count = _int_param(params, "count", 1, minimum=1)
    age = _int_param(params, "age_ms", minimum=1)
    default_spacing = int(np.median(np.diff(series.timestamps))) if len(series) > 1 else 1000
    spacing = _int_param(params, "spacing_ms", default_spacing, minimum=1)
    first = int(series.timestamps[0])
    old_ts = np.array(
        [first - age - (count - 1 - j) * spacing for j in range(count)], dtype=np.int64
    )
    value = float(series.values[0])
    new = series.replace(
        timestamps=np.concatenate([old_ts, series.timestamps]),
        values=np.concatenate([np.full(count, value), series.values]),
        present=np.concatenate([np.ones(count, dtype=bool), series.present]),
        arrivals=np.concatenate([old_ts, series.arrivals]),
        has_arrival=np.concatenate(
            [np.full(count, bool(series.has_arrival.any())), series.has_arrival]
        ),
    )
    return [new], {"inserted": count, "timestamps": [int(t) for t in old_ts], "value": value}


def _delay(series, params, rng):
    delay = _int_param(params, "delay_ms", minimum=0)
    slots = _select_slots(params, len(series), rng)
    has = series.has_arrival.copy()
    arrivals = np.where(has, series.arrivals, series.timestamps)
    has[:] = True
    arrivals = arrivals.copy()
    arrivals[slots] = series.timestamps[slots] + delay
    new = series.replace(arrivals=arrivals, has_arrival=has)
    return [new], {
        "slots": slots,
        "timestamps": [int(series.timestamps[s]) for s in slots],
        "delay_ms": delay,
    }


def _rule_breach(series, params, rng):
    slots = _select_slots(params, len(series), rng)
    _present_slots(series, slots)
    values = series.values.copy()
    if "value" in params:
        values[slots] = _float_param(params, "value")
    else:
        values[slots] = values[slots] + _float_param(params, "offset")
    new = series.replace(values=values)
    return [new], {
        "slots": slots,
        "timestamps": [int(series.timestamps[s]) for s in slots],
        "values": [float(values[s]) for s in slots],
    }


_HANDLERS = {
    "gap": _gap,
    "spike": _spike,
    "bias": _bias,
    "drift": _drift,
    "stale": _stale,
    "delay": _delay,
    "rule-breach": _rule_breach,
}


def inject_antipattern(dataset: Dataset, spec: AntipatternSpec) -> tuple[Dataset, Annotation]:
    """Apply one antipattern to ``spec.parameter`` of ``dataset``.

    Random slot choices draw from ``numpy.random.default_rng(spec.seed)``,
    so equal inputs and seeds give identical outputs.
    """
    if spec.parameter not in dataset:
        raise InjectionError(f"unknown parameter {spec.parameter!r}")
    series = dataset.get(spec.parameter)
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "duplicate-subset":
        new_series, changes = _duplicate_subset(series, spec.parameters, rng, dataset)
    else:
        new_series, changes = _HANDLERS[spec.kind](series, spec.parameters, rng)
    annotation = Annotation(spec.kind, spec.parameter, spec.seed, changes)
    return dataset.with_series(*new_series), annotation
