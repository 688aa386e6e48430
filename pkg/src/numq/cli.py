"""``numq`` command line.

Exit codes: 0 success / progress, 2 invalid input or config, 3 nothing
evaluable, 4 improve chosen or replayed, 5 a decision is needed but the
run is non-interactive.
"""

from __future__ import annotations

import argparse
import getpass
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import load_config, load_policy
from .dataset import parse_dataset, serialize_dataset
from .errors import ConfigError, EvaluationError, InjectionError, NumqError
from .evaluate import QualityReport, evaluate_all
from .gate import (
    AUTO_IMPROVE, AUTO_PROGRESS, PROGRESS, PROMPT, DecisionLedger, GatePolicy, gate,
    record_decision,
)
from .inject import AntipatternSpec, inject_antipattern
from .report import render_table
from .timeutil import parse_instant

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOT_EVALUABLE = 3
EXIT_IMPROVE = 4
EXIT_NEEDS_DECISION = 5

AS_OF_ENV = "NUMQ_AS_OF"


def _err(msg: str) -> None:
    print(f"numq: {msg}", file=sys.stderr)


def _data_format(path: Path) -> str:
    return "jsonl" if path.suffix.lower() in (".jsonl", ".ndjson") else "csv"


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: Optional[Path], text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def _load_report(path: Path) -> QualityReport:
    try:
        return QualityReport.from_json(_read_bytes(path).decode("utf-8"))
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"unparseable report {path}: {exc}") from None


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    data_path = Path(args.data)
    dataset, parse_report = parse_dataset(
        _read_bytes(data_path),
        _data_format(data_path),
        dataset_id=cfg.dataset_id or data_path.stem,
        provenance=str(data_path),
        units=cfg.units,
    )
    if parse_report.error_count or parse_report.warning_count:
        _err(
            f"{data_path}: {parse_report.error_count} row(s) rejected "
            f"({parse_report.duplicate_rows} duplicate), {parse_report.warning_count} warning(s)"
        )
    as_of = None
    if os.environ.get(AS_OF_ENV):
        try:
            as_of = parse_instant(os.environ[AS_OF_ENV])
        except ValueError as exc:
            raise ConfigError(str(exc), AS_OF_ENV) from None
    try:
        report = evaluate_all(dataset, cfg.evaluation, as_of=as_of)
    except EvaluationError as exc:
        _err(str(exc))
        return EXIT_NOT_EVALUABLE
    if parse_report.error_count or parse_report.warning_count:
        note = (
            f"ingestion: {parse_report.rows_accepted} rows accepted, "
            f"{parse_report.error_count} rejected ({parse_report.duplicate_rows} duplicate), "
            f"{parse_report.warning_count} value warning(s)"
        )
        report = QualityReport(
            report.dataset_id, report.evaluated_at, report.config_fingerprint, report.scores,
            report.aggregate, report.findings, report.notes + (note,),
        )
    text = report.to_json() if args.format == "json" else render_table(report, cfg.policy)
    _write(Path(args.out) if args.out else None, text)
    return EXIT_OK


def _ask(outcome) -> Optional[str]:
    print("Data quality below standard at this node:")
    for e in outcome.triggering:
        d = e.to_dict()
        print(f"  {d['parameter']:<16} {d['dimension']:<14} {d['score']}  {d['band']:<8} impact={d['impact']}")
    print(f"condition key: {outcome.condition_key}")
    for _ in range(3):
        print("progress or improve? [progress/improve] ", end="", flush=True)
        line = sys.stdin.readline()
        if not line:
            return None
        answer = line.strip().lower()
        if answer in ("p", "progress"):
            return "progress"
        if answer in ("i", "improve"):
            return "improve"
    return None


def cmd_gate(args: argparse.Namespace) -> int:
    report = _load_report(Path(args.report))
    policy = load_policy(args.policy) if args.policy else GatePolicy()
    ledger = DecisionLedger(args.ledger) if args.ledger else DecisionLedger()
    outcome = gate(report, policy, ledger, args.node)

    if outcome.verdict == PROMPT and args.interactive:
        choice = _ask(outcome)
        if choice is None:
            _err("no decision given")
            print(json.dumps(outcome.to_dict(), sort_keys=True))
            return EXIT_NEEDS_DECISION
        operator = args.operator or getpass.getuser()
        record_decision(ledger, outcome.condition_key, choice, operator)
        print(f"verdict: {choice} (recorded)")
        return EXIT_OK if choice == "progress" else EXIT_IMPROVE

    print(f"verdict: {outcome.verdict}")
    if outcome.verdict == PROMPT:
        print(json.dumps(outcome.to_dict(), sort_keys=True))
        return EXIT_NEEDS_DECISION
    if outcome.verdict in (PROGRESS, AUTO_PROGRESS):
        return EXIT_OK
    assert outcome.verdict == AUTO_IMPROVE
    return EXIT_IMPROVE


def cmd_inject(args: argparse.Namespace) -> int:
    data_path = Path(args.data)
    try:
        spec = AntipatternSpec.from_dict(json.loads(_read_bytes(Path(args.spec))))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", args.spec) from None
    dataset, _ = parse_dataset(_read_bytes(data_path), _data_format(data_path),
                               dataset_id=data_path.stem)
    mutated, annotation = inject_antipattern(dataset, spec)
    out = Path(args.out)
    out.write_text(serialize_dataset(mutated, _data_format(out)), encoding="utf-8")
    ann_path = Path(args.annotation) if args.annotation else out.with_name(out.name + ".annotation.json")
    ann_path.write_text(annotation.to_json(), encoding="utf-8")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    report = _load_report(Path(args.report))
    policy = load_policy(args.policy) if args.policy else None
    if args.format == "json":
        sys.stdout.write(report.to_json())
    else:
        sys.stdout.write(render_table(report, policy))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="numq", description="Numerical data quality evaluation and gating")
    sub = ap.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="score a dataset on all eight dimensions")
    ev.add_argument("--data", required=True, help="CSV or JSON-lines dataset")
    ev.add_argument("--config", required=True, help="JSON configuration document")
    ev.add_argument("--out", help="output file (default: stdout)")
    ev.add_argument("--format", choices=("json", "table"), default="json")
    ev.set_defaults(func=cmd_evaluate)

    gt = sub.add_parser("gate", help="decide progress/improve from a report")
    gt.add_argument("--report", required=True)
    gt.add_argument("--policy", help="policy document (or config with a 'gate' section)")
    gt.add_argument("--ledger", help="JSON-lines decision ledger")
    gt.add_argument("--node", required=True, help="workflow node id")
    gt.add_argument("--interactive", action="store_true")
    gt.add_argument("--operator", help="operator id recorded with decisions")
    gt.set_defaults(func=cmd_gate)

    ij = sub.add_parser("inject", help="inject a synthetic antipattern")
    ij.add_argument("--data", required=True)
    ij.add_argument("--spec", required=True, help="JSON antipattern spec")
    ij.add_argument("--out", required=True)
    ij.add_argument("--annotation", help="annotation path (default: <out>.annotation.json)")
    ij.set_defaults(func=cmd_inject)

    rp = sub.add_parser("report", help="render a saved report")
    rp.add_argument("--report", required=True)
    rp.add_argument("--format", choices=("table", "json"), default="table")
    rp.add_argument("--policy", help="show bands against this policy")
    rp.set_defaults(func=cmd_report)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InjectionError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    except NumqError as exc:
        _err(str(exc))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
