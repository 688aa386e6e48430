"""Declarative consistency rules.

Each rule is evaluated independently against every present point of every
series in its scope. Predicates are total: they return pass/fail for any
finite input and never raise.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from decimal import Decimal
from typing import Union

import numpy as np

from .dataset import Series

ALL = "*"


@dataclass(frozen=True)
class RangeCheck:
    min: float | None = None
    max: float | None = None

    def evaluate(self, series: Series, ts: np.ndarray, vals: np.ndarray) -> np.ndarray:
        ok = np.ones(vals.shape, dtype=bool)
        if self.min is not None:
            ok &= vals >= self.min
        if self.max is not None:
            ok &= vals <= self.max
        return ok

    def describe(self) -> dict:
        return {"type": "range", "min": self.min, "max": self.max}


def decimal_places(value: float) -> int:
    """Fraction digits of the shortest round-trip decimal form of ``value``."""
    exponent = Decimal(repr(float(value))).normalize().as_tuple().exponent
    return max(0, -int(exponent))


@dataclass(frozen=True)
class MaxDecimalPlaces:
    places: int

    def evaluate(self, series: Series, ts: np.ndarray, vals: np.ndarray) -> np.ndarray:
        if vals.size == 0:
            return np.ones(0, dtype=bool)
        uniq, inverse = np.unique(vals, return_inverse=True)
        ok = np.fromiter(
            (decimal_places(v) <= self.places for v in uniq.tolist()),
            dtype=bool, count=uniq.size,
        )
        return ok[inverse]

    def describe(self) -> dict:
        return {"type": "max_decimal_places", "places": self.places}


@dataclass(frozen=True)
class UnitEquals:
    unit: str

    def evaluate(self, series: Series, ts: np.ndarray, vals: np.ndarray) -> np.ndarray:
        return np.full(vals.shape, series.unit == self.unit, dtype=bool)

    def describe(self) -> dict:
        return {"type": "unit_equals", "unit": self.unit}


@dataclass(frozen=True)
class MonotoneNondecreasing:
    """A point passes when its value is not below the previous present value."""

    def evaluate(self, series: Series, ts: np.ndarray, vals: np.ndarray) -> np.ndarray:
        ok = np.ones(vals.shape, dtype=bool)
        if vals.size > 1:
            ok[1:] = vals[1:] >= vals[:-1]
        return ok

    def describe(self) -> dict:
        return {"type": "monotone_nondecreasing"}


_ALLOWED_NODES = (
    ast.Expression, ast.BoolOp, ast.And, ast.Or, ast.UnaryOp, ast.Not, ast.USub, ast.UAdd,
    ast.BinOp, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.FloorDiv, ast.Mod,
    ast.Compare, ast.Eq, ast.NotEq, ast.Lt, ast.LtE, ast.Gt, ast.GtE,
    ast.Name, ast.Load, ast.Constant, ast.Call, ast.IfExp,
)
_FUNCTIONS = {
    "abs": abs, "min": min, "max": max, "round": round,
    "floor": math.floor, "ceil": math.ceil, "sqrt": math.sqrt, "log10": math.log10,
}
_VARIABLES = {"timestamp", "value"}


def compile_expression(source: str):
    """Compile a restricted boolean expression over ``timestamp`` and ``value``.

    Raises ValueError for syntax errors or disallowed constructs (attribute
    access, subscripts, unknown names, non-numeric constants).
    """
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"invalid expression {source!r}: {exc.msg}") from None
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ValueError(f"disallowed syntax {type(node).__name__} in {source!r}")
        if isinstance(node, ast.Name) and node.id not in _VARIABLES | _FUNCTIONS.keys():
            raise ValueError(f"unknown name {node.id!r} in {source!r}")
        if isinstance(node, ast.Call) and not (
            isinstance(node.func, ast.Name) and node.func.id in _FUNCTIONS
        ):
            raise ValueError(f"only {sorted(_FUNCTIONS)} may be called in {source!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ValueError(f"non-numeric constant {node.value!r} in {source!r}")
    return compile(tree, "<rule>", "eval")


@dataclass(frozen=True)
class Expression:
    source: str

    def __post_init__(self) -> None:
        compile_expression(self.source)

    def evaluate(self, series: Series, ts: np.ndarray, vals: np.ndarray) -> np.ndarray:
        code = compile_expression(self.source)
        env = {"__builtins__": {}, **_FUNCTIONS}
        out = np.empty(vals.shape, dtype=bool)
        for i, (t, v) in enumerate(zip(ts.tolist(), vals.tolist())):
            env["timestamp"] = t
            env["value"] = v
            try:
                out[i] = bool(eval(code, env))
            except Exception:
                out[i] = False
        return out

    def describe(self) -> dict:
        return {"type": "expression", "expression": self.source}


Predicate = Union[RangeCheck, MaxDecimalPlaces, UnitEquals, MonotoneNondecreasing, Expression]


@dataclass(frozen=True)
class Rule:
    rule_id: str
    predicate: Predicate
    scope: str = ALL

    def applies_to(self, parameter_id: str) -> bool:
        return self.scope == ALL or self.scope == parameter_id

    def describe(self) -> dict:
        return {"id": self.rule_id, "scope": self.scope, **self.predicate.describe()}


@dataclass(frozen=True)
class RuleOutcome:
    rule: Rule
    passed: np.ndarray  # bool, one entry per present point
    point_index: np.ndarray  # series positions of those points


def applicable_rules(series: Series, rules: list[Rule]) -> list[Rule]:
    return [r for r in rules if r.applies_to(series.parameter_id)]


def check_rules(series: Series, rules: list[Rule]) -> list[RuleOutcome]:
    """Evaluate every applicable rule on every present point of ``series``."""
    idx = np.flatnonzero(series.present)
    ts = series.timestamps[idx]
    vals = series.values[idx]
    return [
        RuleOutcome(rule, np.asarray(rule.predicate.evaluate(series, ts, vals), dtype=bool), idx)
        for rule in applicable_rules(series, rules)
    ]
