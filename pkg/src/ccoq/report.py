"""Report documents and their JSON / CSV / Markdown / plot-data renderings.

Every report carries a JSON ``body`` tree and a flat table (``columns`` and
``rows``). CSV, Markdown and plot data render the table; JSON renders the
body. Both are built from the same rounded values so the numbers agree
across formats.

JSON schema (``ccoq.report/1``), keys sorted::

    {"schema": "ccoq.report/1", "kind": "<Coq|Split|...>",
     "body": {...}, "notes": [...], "generated_at": <only with stamp>}

Amounts are integer minor units; percentages are numbers with at most two
decimals; kappa appears both as an exact fraction string and rounded.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal
from fractions import Fraction
from typing import Any, Sequence

from .agreement import LABELS, AgreementResult, format_labels
from .errors import Finding
from .metrics import (
    BUCKET_FIELDS,
    CoqBreakdown,
    DevelopmentCostSplit,
    ParetoTable,
    RatioSet,
    TrendSeries,
    diagnostics,
    format_fraction,
    largest_remainder,
)

SCHEMA = "ccoq.report/1"

BUCKET_NAMES = tuple(BUCKET_FIELDS.values())
BREAKDOWN_NAMES = BUCKET_NAMES + ("conformance", "nonconformance", "total")


class ReportKind(str, enum.Enum):
    COQ = "Coq"
    SPLIT = "Split"
    TREND = "Trend"
    PARETO = "Pareto"
    AGREEMENT = "Agreement"
    VALIDATION = "Validation"


class OutputFormat(str, enum.Enum):
    JSON = "json"
    CSV = "csv"
    MARKDOWN = "markdown"
    PLOT = "plot"

    @classmethod
    def parse(cls, text: str) -> OutputFormat:
        key = text.strip().lower()
        aliases = {"md": "markdown", "plotdata": "plot", "dat": "plot"}
        return cls(aliases.get(key, key))


Cell = int | str | Decimal | None


@dataclass
class ReportDocument:
    kind: ReportKind
    body: dict[str, Any]
    columns: tuple[str, ...]
    rows: list[tuple[Cell, ...]]
    notes: list[str] = field(default_factory=list)
    title: str = ""
    # Plot data columns as (header, column index into rows); first is the key.
    plot_columns: tuple[tuple[str, int], ...] = ()


# Builders ---------------------------------------------------------------------

def _rounded_bucket_shares(b: CoqBreakdown) -> dict[str, Decimal]:
    """Bucket shares of total, largest-remainder rounded; derived rows are sums."""
    if b.total == 0:
        shares = {n: Decimal("0.00") for n in BUCKET_NAMES}
    else:
        shares = dict(
            zip(BUCKET_NAMES, largest_remainder([Fraction(100 * getattr(b, n), b.total) for n in BUCKET_NAMES]))
        )
    shares["conformance"] = shares["prevention"] + shares["appraisal"]
    shares["nonconformance"] = shares["internal_failure"] + shares["external_failure"] + shares["rework_fallback"]
    shares["total"] = shares["conformance"] + shares["nonconformance"]
    return shares


def coq_report(b: CoqBreakdown, scope_label: str = "all", notes: Sequence[str] | None = None) -> ReportDocument:
    shares = _rounded_bucket_shares(b)
    notes = list(diagnostics(b) if notes is None else notes)
    body = {
        "scope": scope_label,
        "currency": b.currency,
        "amounts": b.as_dict(),
        "share_pct": {k: _num(v) for k, v in shares.items()},
    }
    rows = [(name, getattr(b, name), shares[name]) for name in BREAKDOWN_NAMES]
    return ReportDocument(
        ReportKind.COQ, body, ("measure", "amount", "share_pct"), rows, notes,
        title=f"Cost of quality ({scope_label}, {b.currency} minor units)",
        plot_columns=(("measure", 0), ("amount", 1), ("share_pct", 2)),
    )


SPLIT_COLUMNS = ("component",) + BREAKDOWN_NAMES + ("pct_of_total",)


def split_report(split: DevelopmentCostSplit, ratio_set: RatioSet | None) -> ReportDocument:
    if ratio_set is not None:
        r = ratio_set.rounded()
        pct = {"ccoq": r["ccoq_pct"], "coq": r["coq_pct"], "development": r["development_pct"]}
        pct["total_development"] = pct["ccoq"] + pct["coq"] + pct["development"]
    else:
        pct = {}
    rows: list[tuple[Cell, ...]] = []
    for name, b in (("ccoq", split.ccoq), ("coq", split.coq)):
        rows.append((name,) + tuple(getattr(b, n) for n in BREAKDOWN_NAMES) + (pct.get(name),))
    blanks: tuple[Cell, ...] = (None,) * (len(BREAKDOWN_NAMES) - 1)
    rows.append(("development",) + blanks + (split.development, pct.get("development")))
    rows.append(("total_development",) + blanks + (split.total, pct.get("total_development")))

    body: dict[str, Any] = {
        "currency": split.currency,
        "ccoq": split.ccoq.as_dict(),
        "coq": split.coq.as_dict(),
        "development": split.development,
        "total": split.total,
    }
    if ratio_set is not None:
        body["pct_of_total"] = {k: _num(v) for k, v in pct.items()}
        body["bucket_pct"] = {
            section: {k: _num(v) for k, v in r[f"{section}_buckets"].items()} for section in ("ccoq", "coq")
        }
    notes = [f"ccoq: {n}" for n in diagnostics(split.ccoq)]
    return ReportDocument(
        ReportKind.SPLIT, body, SPLIT_COLUMNS, rows, notes,
        title=f"Total development cost split ({split.currency} minor units)",
        plot_columns=tuple((c, i) for i, c in enumerate(SPLIT_COLUMNS)),
    )


TREND_COLUMNS = ("period",) + BREAKDOWN_NAMES + ("months_present", "partial")


def trend_report(series: TrendSeries, scope_label: str = "all") -> ReportDocument:
    rows = []
    points = []
    for p in series.points:
        b = p.breakdown
        rows.append((str(p.period),) + tuple(getattr(b, n) for n in BREAKDOWN_NAMES)
                    + (p.months_present, "yes" if p.partial else "no"))
        points.append({"period": str(p.period), "months_present": p.months_present,
                       "partial": p.partial, **b.as_dict()})
    body = {
        "granularity": series.granularity.value,
        "scope": scope_label,
        "currency": series.points[0].breakdown.currency if series.points else None,
        "points": points,
    }
    notes = [f"{p.period} is a partial quarter ({p.months_present} of 3 months)" for p in series.points if p.partial]
    idx = {c: i for i, c in enumerate(TREND_COLUMNS)}
    return ReportDocument(
        ReportKind.TREND, body, TREND_COLUMNS, rows, notes,
        title=f"{series.granularity.value} cost of quality trend ({scope_label})",
        plot_columns=(
            ("period", 0),
            ("P", idx["prevention"]),
            ("A", idx["appraisal"]),
            ("IF", idx["internal_failure"]),
            ("EF", idx["external_failure"]),
            ("total", idx["total"]),
        ),
    )


def pareto_report(table: ParetoTable) -> ReportDocument:
    shares = table.rounded_shares()
    cumulative = []
    running = Decimal("0.00")
    for s in shares:
        running += s
        cumulative.append(running)
    rows = [(r.key, r.amount, s, c) for r, s, c in zip(table.rows, shares, cumulative)]
    body = {
        "group_by": table.group_by,
        "currency": table.currency,
        "total": table.total,
        "rows": [{"key": k, "amount": a, "share": _num(s), "cumulative": _num(c)} for k, a, s, c in rows],
    }
    return ReportDocument(
        ReportKind.PARETO, body, ("key", "amount", "share", "cumulative"), rows,
        title=f"Pareto by {table.group_by} ({table.currency} minor units)",
        plot_columns=(("key", 0), ("amount", 1), ("share", 2), ("cumulative", 3)),
    )


def agreement_report(result: AgreementResult) -> ReportDocument:
    kappa_exact = None if result.kappa is None else _frac(result.kappa)
    body = {
        "unit_count": result.unit_count,
        "observed_agreement": _frac(result.observed_agreement),
        "expected_agreement": _frac(result.expected_agreement),
        "kappa": kappa_exact,
        "kappa_rounded": None if result.kappa is None else _num(Decimal(result.kappa_text)),
        "band": result.band,
        "degenerate": result.degenerate,
        "labels": [l.value for l in LABELS],
        "table": [list(r) for r in result.table],
        "disagreements": [
            {"subcategory": str(sid), "rater_a": format_labels(a), "rater_b": format_labels(b)}
            for sid, a, b in result.disagreements
        ],
    }
    rows: list[tuple[Cell, ...]] = [
        ("unit_count", result.unit_count),
        ("observed_agreement", Decimal(format_fraction(result.observed_agreement, 4))),
        ("expected_agreement", Decimal(format_fraction(result.expected_agreement, 4))),
        ("kappa", None if result.kappa is None else Decimal(result.kappa_text)),
        ("band", result.band),
        ("disagreements", len(result.disagreements)),
    ]
    notes = [f"{sid}: {format_labels(a)} vs {format_labels(b)}" for sid, a, b in result.disagreements]
    if result.degenerate:
        notes.insert(0, "kappa undefined: chance agreement is 1 (all units in one cell)")
    return ReportDocument(
        ReportKind.AGREEMENT, body, ("metric", "value"), rows, notes,
        title="Interrater agreement (Cohen's kappa)",
    )


def validation_report(findings: Sequence[Finding], summary: dict[str, Any] | None = None) -> ReportDocument:
    rows = [(f.severity, f.code, f.location or (f"row {f.row}" if f.row else ""), f.message) for f in findings]
    body = {
        "summary": summary or {},
        "errors": sum(1 for f in findings if f.severity == "error"),
        "warnings": sum(1 for f in findings if f.severity == "warning"),
        "findings": [
            {"severity": s, "code": c, "location": loc, "message": m} for s, c, loc, m in rows
        ],
    }
    return ReportDocument(
        ReportKind.VALIDATION, body, ("severity", "code", "location", "message"), rows,
        title="Validation findings",
    )


# Emission ---------------------------------------------------------------------

def _num(value: Decimal) -> float | int:
    # Two-decimal Decimals convert to floats whose shortest repr is the same digits.
    return float(value)


def _frac(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def _cell(value: Cell) -> str:
    if value is None:
        return ""
    return str(value)


def emit(report: ReportDocument, fmt: OutputFormat | str = OutputFormat.JSON, stamp: bool = False) -> bytes:
    """Render ``report``; output is byte-identical for identical inputs unless ``stamp``."""
    fmt = OutputFormat.parse(fmt) if isinstance(fmt, str) else fmt
    if fmt is OutputFormat.JSON:
        doc: dict[str, Any] = {"schema": SCHEMA, "kind": report.kind.value, "body": report.body,
                               "notes": report.notes}
        if stamp:
            doc["generated_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
        return (json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")

    if fmt is OutputFormat.CSV:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(report.columns)
        for row in report.rows:
            writer.writerow([_cell(v) for v in row])
        return buf.getvalue().encode("utf-8")

    if fmt is OutputFormat.MARKDOWN:
        lines = []
        if report.title:
            lines += [f"## {report.title}", ""]
        lines.append("| " + " | ".join(report.columns) + " |")
        lines.append("|" + "|".join("---" for _ in report.columns) + "|")
        for row in report.rows:
            lines.append("| " + " | ".join(_cell(v).replace("|", "\\|") for v in row) + " |")
        if report.notes:
            lines += [""] + [f"- {n}" for n in report.notes]
        if stamp:
            lines += ["", f"_generated {datetime.now(timezone.utc).isoformat(timespec='seconds')}_"]
        return ("\n".join(lines) + "\n").encode("utf-8")

    # Plot data: whitespace-separated columns, '#' header, NaN for blanks.
    cols = report.plot_columns or tuple((c, i) for i, c in enumerate(report.columns))
    lines = ["# " + " ".join(h for h, _ in cols)]
    for row in report.rows:
        cells = []
        for _, i in cols:
            v = row[i]
            cells.append("NaN" if v is None else str(v).replace(" ", "_"))
        lines.append(" ".join(cells))
    return ("\n".join(lines) + "\n").encode("utf-8")
