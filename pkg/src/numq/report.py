"""Human-readable rendering of quality reports."""

from __future__ import annotations

from collections import Counter
from typing import Optional

from .evaluate import QualityReport, format_proportion
from .gate import GatePolicy, band
from .metrics import DIMENSIONS
from .timeutil import format_rfc3339

NA = "n/a"


def _table(header: list[str], rows: list[list[str]]) -> list[str]:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*header), fmt.format(*("-" * w for w in widths))]
    lines += [fmt.format(*row) for row in rows]
    return [line.rstrip() for line in lines]


def render_table(
    report: QualityReport,
    policy: Optional[GatePolicy] = None,
    max_findings: Optional[int] = 20,
) -> str:
    """Render scores, per-cell finding counts and findings grouped by dimension.

    At most ``max_findings`` findings are listed per dimension (``None`` lists
    all); the JSON form always carries every finding.
    """
    out = [
        f"dataset: {report.dataset_id}",
        f"evaluated at: {format_rfc3339(report.evaluated_at)}",
        f"config fingerprint: {report.config_fingerprint}",
        "",
    ]

    summary = []
    for pid, dims in report.scores.items():
        summary.append([pid] + [
            format_proportion(dims[d].proportion) if d in dims and dims[d].evaluable else NA
            for d in DIMENSIONS
        ])
    summary.append(["(aggregate)"] + [
        format_proportion(report.aggregate[d].proportion)
        if d in report.aggregate and report.aggregate[d].evaluable else NA
        for d in DIMENSIONS
    ])
    out += _table(["parameter", *DIMENSIONS], summary)
    out.append("")

    counts = Counter((f.parameter_id, f.linked_dimension) for f in report.findings)
    header = ["parameter", "dimension", "proportion", "m/n"]
    if policy is not None:
        header.append("band")
    header.append("findings")
    rows = []
    for pid, dims in report.scores.items():
        for dim, s in dims.items():
            row = [
                pid, dim,
                format_proportion(s.proportion) if s.evaluable else NA,
                f"{s.numerator}/{s.denominator}" if s.evaluable else NA,
            ]
            if policy is not None:
                row.append(band(s, policy.entry_for(pid, dim)))
            row.append(str(counts.get((pid, dim), 0)))
            rows.append(row)
    out += _table(header, rows)

    if report.findings:
        out += ["", "findings"]
        by_dim: dict[str, list] = {}
        for f in report.findings:
            by_dim.setdefault(f.linked_dimension, []).append(f)
        for dim in DIMENSIONS:
            if dim not in by_dim:
                continue
            found = by_dim[dim]
            shown = found if max_findings is None else found[:max_findings]
            out.append(f"  {dim} ({len(found)})")
            rows = [
                [f.kind, f.parameter_id,
                 str(f.start) if f.start == f.end else f"{f.start}..{f.end}",
                 f"{f.magnitude:.6g}"]
                for f in shown
            ]
            out += ["    " + line for line in _table(["kind", "parameter", "location", "magnitude"], rows)]
            if len(shown) < len(found):
                out.append(f"    ... {len(found) - len(shown)} more (see the JSON report)")

    if report.notes:
        out += ["", "notes"] + [f"  - {n}" for n in report.notes]
    return "\n".join(out) + "\n"
