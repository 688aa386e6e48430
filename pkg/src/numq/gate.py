"""Quality gate: impact levels, low/high boundaries and recorded decisions.

The gate only reads a :class:`~numq.evaluate.QualityReport`, so a verdict can
be reproduced from a serialized report alone. Human choices are kept in an
append-only JSON-lines ledger and replayed whenever the same condition key
comes up again.
"""

from __future__ import annotations

import fcntl
import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .errors import LedgerError, NumqError
from .evaluate import QualityReport, format_proportion
from .metrics import DIMENSIONS, DimensionScore

LOW, MEDIUM, HIGH = 1, 2, 3
IMPACT_LEVELS = {"low": LOW, "medium": MEDIUM, "high": HIGH}
IMPACT_NAMES = {v: k for k, v in IMPACT_LEVELS.items()}

PASS, MARGINAL, FAIL, NOT_EVALUABLE = "pass", "marginal", "fail", "not-evaluable"

PROGRESS, PROMPT, AUTO_PROGRESS, AUTO_IMPROVE = "progress", "prompt", "auto-progress", "auto-improve"
CHOICES = ("progress", "improve")

WILDCARD = "*"


class GateError(NumqError):
    pass


def _decimal(x: float) -> Fraction:
    # boundaries are read as the decimals they were written as (0.8 is 4/5)
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class PolicyEntry:
    impact: int = MEDIUM
    low: float = 0.80
    high: float = 0.95

    def __post_init__(self) -> None:
        if self.impact not in IMPACT_NAMES:
            raise ValueError(f"impact must be one of {sorted(IMPACT_NAMES)}, got {self.impact!r}")
        if not 0 <= self.low <= self.high <= 1:
            raise ValueError(f"need 0 <= low <= high <= 1, got low={self.low}, high={self.high}")

    def to_dict(self) -> dict:
        return {"impact": IMPACT_NAMES[self.impact], "low": self.low, "high": self.high}


@dataclass(frozen=True)
class GatePolicy:
    """Entries keyed by (parameter, dimension); either side may be ``"*"``.

    Lookup order: exact pair, (parameter, *), (*, dimension), default.
    """

    entries: dict[tuple[str, str], PolicyEntry] = field(default_factory=dict)
    default: PolicyEntry = PolicyEntry()

    def entry_for(self, parameter_id: str, dimension: str) -> PolicyEntry:
        for key in (
            (parameter_id, dimension), (parameter_id, WILDCARD), (WILDCARD, dimension),
            (WILDCARD, WILDCARD),
        ):
            if key in self.entries:
                return self.entries[key]
        return self.default

    def to_dict(self) -> dict:
        return {
            "default": self.default.to_dict(),
            "entries": [
                {"parameter": p, "dimension": d, **e.to_dict()}
                for (p, d), e in sorted(self.entries.items())
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GatePolicy":
        def entry(d: dict, base: PolicyEntry) -> PolicyEntry:
            impact = d.get("impact", base.impact)
            if isinstance(impact, str):
                if impact not in IMPACT_LEVELS:
                    raise ValueError(f"unknown impact level {impact!r}")
                impact = IMPACT_LEVELS[impact]
            return PolicyEntry(int(impact), float(d.get("low", base.low)), float(d.get("high", base.high)))

        default = entry(data.get("default", {}), PolicyEntry())
        entries = {}
        for e in data.get("entries", []):
            dim = e.get("dimension", WILDCARD)
            if dim != WILDCARD and dim not in DIMENSIONS:
                raise ValueError(f"unknown dimension {dim!r}")
            entries[(e.get("parameter", WILDCARD), dim)] = entry(e, default)
        return cls(entries, default)

    def fingerprint(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def band(score: DimensionScore, entry: PolicyEntry) -> str:
    """pass (>= high), marginal (>= low), fail (< low); both limits inclusive."""
    if not score.evaluable:
        return NOT_EVALUABLE
    p = score.proportion
    if p >= _decimal(entry.high):
        return PASS
    if p >= _decimal(entry.low):
        return MARGINAL
    return FAIL


def _bands(report: QualityReport, policy: GatePolicy) -> list[tuple[str, str, str]]:
    return sorted(
        (pid, dim, band(s, policy.entry_for(pid, dim)))
        for pid, dims in report.scores.items()
        for dim, s in dims.items()
    )


def condition_key(report: QualityReport, policy: GatePolicy, node_id: str) -> str:
    """Digest of (node, dataset, policy, band per score). Raw scores are left
    out so jitter inside a band reuses an earlier decision."""
    payload = {
        "node": node_id,
        "dataset": report.dataset_id,
        "policy": policy.fingerprint(),
        "bands": [list(b) for b in _bands(report, policy)],
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True)
class GateEntry:
    parameter_id: str
    dimension: str
    proportion: Optional[Fraction]
    band: str
    impact: int

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter_id,
            "dimension": self.dimension,
            "score": None if self.proportion is None else format_proportion(self.proportion),
            "band": self.band,
            "impact": IMPACT_NAMES[self.impact],
        }


@dataclass(frozen=True)
class GateOutcome:
    verdict: str
    triggering: tuple[GateEntry, ...]
    condition_key: str
    waived: tuple[GateEntry, ...] = ()
    not_evaluable: tuple[GateEntry, ...] = ()
    decision: Optional["DecisionRecord"] = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "condition_key": self.condition_key,
            "triggering": [e.to_dict() for e in self.triggering],
            "waived": [e.to_dict() for e in self.waived],
            "not_evaluable": [e.to_dict() for e in self.not_evaluable],
            "decision": None if self.decision is None else self.decision.to_dict(),
        }


# -------------------------------------------------------------------- ledger


@dataclass(frozen=True)
class DecisionRecord:
    condition_key: str
    choice: str
    decided_at: int
    decided_by: str

    def to_dict(self) -> dict:
        return {
            "condition_key": self.condition_key,
            "choice": self.choice,
            "decided_at": self.decided_at,
            "decided_by": self.decided_by,
        }


class DecisionLedger:
    """Append-only store of decisions; the newest record per key wins.

    With a ``path`` every append is written to a JSON-lines file under an
    exclusive ``flock`` and fsynced before the in-memory index changes, so a
    failed write leaves the ledger as it was. Without a path the ledger
    lives in memory only.
    """

    def __init__(self, path: Optional[os.PathLike | str] = None) -> None:
        self.path = Path(path) if path is not None else None
        self._records: list[DecisionRecord] = []
        self._latest: dict[str, DecisionRecord] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        try:
            text = self.path.read_text(encoding="utf-8")
        except OSError as exc:
            raise LedgerError(f"cannot read ledger {self.path}: {exc}") from exc
        lines = text.split("\n")
        for i, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                rec = DecisionRecord(
                    str(d["condition_key"]), str(d["choice"]), int(d["decided_at"]),
                    str(d.get("decided_by", "")),
                )
                if rec.choice not in CHOICES:
                    raise ValueError(f"unknown choice {rec.choice!r}")
            except (ValueError, KeyError, TypeError) as exc:
                if i == len(lines):
                    # an unterminated final line is a write that never completed
                    continue
                raise LedgerError(f"{self.path}:{i}: malformed ledger record ({exc})") from None
            self._index(rec)

    def _index(self, rec: DecisionRecord) -> None:
        self._records.append(rec)
        self._latest[rec.condition_key] = rec

    def lookup(self, key: str) -> Optional[DecisionRecord]:
        return self._latest.get(key)

    def history(self, key: str) -> list[DecisionRecord]:
        return [r for r in self._records if r.condition_key == key]

    @property
    def records(self) -> tuple[DecisionRecord, ...]:
        return tuple(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def append(self, rec: DecisionRecord) -> None:
        line = (json.dumps(rec.to_dict(), sort_keys=True) + "\n").encode("utf-8")
        with self._lock:
            if self.path is not None:
                try:
                    fd = os.open(self.path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
                    try:
                        fcntl.flock(fd, fcntl.LOCK_EX)
                        try:
                            os.write(fd, line)
                            os.fsync(fd)
                        finally:
                            fcntl.flock(fd, fcntl.LOCK_UN)
                    finally:
                        os.close(fd)
                except OSError as exc:
                    raise LedgerError(f"cannot write ledger {self.path}: {exc}") from exc
            self._index(rec)


def record_decision(
    ledger: DecisionLedger,
    key: str,
    choice: str,
    operator: str,
    decided_at: Optional[int] = None,
) -> DecisionLedger:
    if choice not in CHOICES:
        raise ValueError(f"choice must be one of {CHOICES}, got {choice!r}")
    at = int(time.time() * 1000) if decided_at is None else int(decided_at)
    ledger.append(DecisionRecord(key, choice, at, operator))
    return ledger


def gate(
    report: QualityReport,
    policy: GatePolicy,
    ledger: DecisionLedger,
    node_id: str,
) -> GateOutcome:
    """Decide whether the dataset may progress past ``node_id``.

    Scores below their high boundary trigger the gate unless their impact is
    low. Triggered conditions replay a recorded decision when the ledger
    holds one, otherwise the outcome is ``prompt``. Not-evaluable scores are
    listed but never trigger.
    """
    if not report.scores or not any(report.scores.values()):
        raise GateError("report has no scores")
    triggering, waived, unknown = [], [], []
    for pid, dims in sorted(report.scores.items()):
        for dim, s in sorted(dims.items()):
            entry = policy.entry_for(pid, dim)
            b = band(s, entry)
            item = GateEntry(pid, dim, s.proportion, b, entry.impact)
            if b == NOT_EVALUABLE:
                unknown.append(item)
            elif b != PASS:
                (waived if entry.impact == LOW else triggering).append(item)
    triggering.sort(key=lambda e: (-e.impact, e.proportion, e.parameter_id, e.dimension))
    key = condition_key(report, policy, node_id)
    decision = None
    if not triggering:
        verdict = PROGRESS
    else:
        decision = ledger.lookup(key)
        if decision is None:
            verdict = PROMPT
        else:
            verdict = AUTO_PROGRESS if decision.choice == "progress" else AUTO_IMPROVE
    return GateOutcome(verdict, tuple(triggering), key, tuple(waived), tuple(unknown), decision)
