"""Brute-force reference computations for the tests.

These work on plain Python lists of DataPoint tuples and never call into
the vectorized code paths they check.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations


def present_points(series):
    return [p for p in series.points if p.value is not None]


def accuracy_oracle(series, true_pairs, tolerance, mode="absolute"):
    """(m, n, exact mean distance as Fraction) by per-point scan."""
    truth = dict(true_pairs)
    m = n = 0
    total = Fraction(0)
    for p in present_points(series):
        if p.timestamp not in truth:
            continue
        t = truth[p.timestamp]
        d_exact = abs(Fraction(p.value) - Fraction(t))
        if mode == "relative":
            d_exact /= abs(Fraction(t))
        n += 1
        d_float = abs(p.value - t) if mode == "absolute" else abs(p.value - t) / abs(t)
        if d_float <= tolerance:
            m += 1
        total += d_exact
    return m, n, (total / n if n else None)


def precision_window_oracle(series, threshold, width):
    """Exhaustive pair enumeration per time bucket."""
    buckets = {}
    for p in present_points(series):
        buckets.setdefault(p.timestamp // width, []).append(p.value)
    m = n = 0
    for vals in buckets.values():
        for a, b in combinations(vals, 2):
            n += 1
            if abs(a - b) <= threshold:
                m += 1
    return m, n


def precision_consecutive_oracle(series, threshold):
    vals = [p.value for p in present_points(series)]
    pairs = list(zip(vals, vals[1:]))
    return sum(abs(a - b) <= threshold for a, b in pairs), len(pairs)


def windows_oracle(dataset, width):
    """All windows as (parameter, index, tuple of (timestamp, value))."""
    out = []
    for s in dataset.series:
        pts = s.points
        for j in range(0, len(pts), width):
            chunk = tuple(
                (p.timestamp, None if p.value is None else p.value + 0.0) for p in pts[j:j + width]
            )
            out.append((s.parameter_id, j // width, chunk))
    return out


def duplicate_windows_oracle(dataset, width):
    """Set of (parameter, window index) equal to some other window, by
    comparing every pair of windows."""
    wins = windows_oracle(dataset, width)
    flagged = set()
    for (pa, ja, ca), (pb, jb, cb) in combinations(wins, 2):
        if ca == cb:
            flagged.add((pa, ja))
            flagged.add((pb, jb))
    return len(wins), flagged


def slope_oracle(timestamps, values):
    """Exact least-squares slope with rational arithmetic."""
    ts = [Fraction(int(t)) for t in timestamps]
    vs = [Fraction(float(v)) for v in values]
    n = len(ts)
    mt = sum(ts) / n
    mv = sum(vs) / n
    num = sum((t - mt) * (v - mv) for t, v in zip(ts, vs))
    den = sum((t - mt) ** 2 for t in ts)
    return float(num / den)


def mad_z_oracle(values):
    vals = sorted(values)

    def median(xs):
        xs = sorted(xs)
        k = len(xs)
        return xs[k // 2] if k % 2 else (xs[k // 2 - 1] + xs[k // 2]) / 2

    med = median(vals)
    mad = median([abs(v - med) for v in vals])
    if mad == 0:
        return med, mad, None
    return med, mad, [0.6745 * abs(v - med) / mad for v in values]


def rules_matrix_oracle(series, predicates):
    """predicates: list of callables (timestamp, value, prev_value) -> bool.
    Returns (passed, checked)."""
    pts = present_points(series)
    passed = checked = 0
    for pred in predicates:
        prev = None
        for p in pts:
            checked += 1
            passed += bool(pred(p.timestamp, p.value, prev))
            prev = p.value
    return passed, checked


def isclose_rel(a, b, rel):
    return math.isclose(a, b, rel_tol=rel, abs_tol=0.0) or a == b
