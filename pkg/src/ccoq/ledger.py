"""Cost-ledger ingestion and classification into quality-cost buckets.

Ledger files are comma-delimited UTF-8 with the header::

    period,subcategory,facet,audience,amount_minor,cost_kind,scope[,currency][,memo]

Amounts are integer minor units (cents). Bad rows are rejected with a
finding and never abort the batch; only an unreadable source or a wrong
header raises.
"""

from __future__ import annotations

import csv
import enum
import io
import re
from dataclasses import dataclass
from functools import total_ordering
from pathlib import Path
from typing import Iterable, Sequence

from .errors import CcoqError, Finding, FormatError, MixedCurrencyError, NotFoundError
from .framework_core import FrameworkCore, SubcategoryId
from .mapping import EF, FAILURES, IF, Mapping, QualityCostCategory

REQUIRED_COLUMNS = ("period", "subcategory", "facet", "audience", "amount_minor", "cost_kind", "scope")
OPTIONAL_COLUMNS = ("currency", "memo")
DEFAULT_CURRENCY = "USD"

_CURRENCY_RE = re.compile(r"^[A-Z]{3}$")
_PERIOD_RE = re.compile(r"^(\d{4})-(\d{2})$")

# Warning codes attached to allocations.
MISSING_FACET = "MISSING_FACET"
MISSING_AUDIENCE = "MISSING_AUDIENCE"
DETECT_CHARGED_AS_FAILURE = "DETECT_CHARGED_AS_FAILURE"
FAILURE_OUTSIDE_MAPPING = "FAILURE_OUTSIDE_MAPPING"
MIXED_CURRENCY = "MIXED_CURRENCY"


class LedgerFormatError(FormatError):
    pass


@dataclass(frozen=True)
class Money:
    minor_units: int
    currency: str = DEFAULT_CURRENCY

    def __add__(self, other: Money) -> Money:
        if not isinstance(other, Money):
            return NotImplemented
        if other.currency != self.currency:
            raise MixedCurrencyError(f"cannot add {self.currency} and {other.currency}")
        return Money(self.minor_units + other.minor_units, self.currency)

    def __str__(self) -> str:
        sign = "-" if self.minor_units < 0 else ""
        whole, cents = divmod(abs(self.minor_units), 100)
        return f"{sign}{whole}.{cents:02d} {self.currency}"


@total_ordering
@dataclass(frozen=True)
class Period:
    """A calendar month."""

    year: int
    month: int

    @classmethod
    def parse(cls, text: str) -> Period:
        m = _PERIOD_RE.match(text.strip())
        if not m or not 1 <= int(m.group(2)) <= 12:
            raise ValueError(f"period {text!r} is not YYYY-MM")
        return cls(int(m.group(1)), int(m.group(2)))

    @property
    def quarter(self) -> int:
        return (self.month - 1) // 3 + 1

    def next(self) -> Period:
        return Period(self.year + self.month // 12, self.month % 12 + 1)

    def __lt__(self, other: Period) -> bool:
        return (self.year, self.month) < (other.year, other.month)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


class Audience(str, enum.Enum):
    INTERNAL = "Internal"
    EXTERNAL = "External"


class CostKind(str, enum.Enum):
    LABOR = "Labor"
    MATERIALS = "Materials"
    CONTRACT = "Contract"


class Scope(str, enum.Enum):
    CYBERSECURITY = "Cybersecurity"
    ORDINARY_QUALITY = "OrdinaryQuality"
    DEVELOPMENT = "Development"


class Bucket(str, enum.Enum):
    PREVENTION = "Prevention"
    APPRAISAL = "Appraisal"
    INTERNAL_FAILURE = "InternalFailure"
    EXTERNAL_FAILURE = "ExternalFailure"
    REWORK = "Rework"

    @classmethod
    def of(cls, category: QualityCostCategory) -> Bucket:
        return cls(category.value)

    @property
    def is_failure(self) -> bool:
        return self in (Bucket.INTERNAL_FAILURE, Bucket.EXTERNAL_FAILURE, Bucket.REWORK)


@dataclass(frozen=True)
class CostRecord:
    period: Period
    subcategory_id: SubcategoryId | None
    amount: Money
    cost_kind: CostKind
    scope: Scope
    facet: str | None = None
    audience: Audience | None = None
    memo: str | None = None


@dataclass(frozen=True)
class Allocation:
    record: CostRecord
    bucket: Bucket | None  # None for Development-scope records
    warnings: tuple[str, ...] = ()


def _enum_value(enum_cls: type[enum.Enum], text: str):
    for member in enum_cls:
        if member.value.lower() == text.lower():
            return member
    raise ValueError(text)


def classify(record: CostRecord, mapping: Mapping) -> Allocation:
    """Select the bucket for one record and attach charging warnings.

    Precedence: facet, then audience, then a single-category entry, then the
    rework fallback for failure-only entries, then the first-listed category.
    """
    if record.scope is Scope.DEVELOPMENT:
        return Allocation(record, None)
    if record.subcategory_id is None:
        raise CcoqError(f"{record.scope.value} record has no subcategory")
    entry = mapping.entry(record.subcategory_id)
    warnings: list[str] = []

    if record.facet:
        bucket = Bucket.of(entry.facet(record.facet).category)
    elif record.audience is not None:
        category = IF if record.audience is Audience.INTERNAL else EF
        bucket = Bucket.of(category)
        if category not in entry.category_set and not entry.detect_caution:
            warnings.append(FAILURE_OUTSIDE_MAPPING)
    elif len(entry.categories) == 1:
        bucket = Bucket.of(entry.categories[0])
    elif entry.category_set == FAILURES:
        bucket = Bucket.REWORK
        warnings.append(MISSING_AUDIENCE)
    else:
        bucket = Bucket.of(entry.categories[0])
        warnings.append(MISSING_FACET)

    if entry.detect_caution and bucket.is_failure:
        warnings.append(DETECT_CHARGED_AS_FAILURE)
    return Allocation(record, bucket, tuple(warnings))


def allocate(records: Iterable[CostRecord], mapping: Mapping) -> list[Allocation]:
    return [classify(r, mapping) for r in records]


def _check_header(header: Sequence[str], where: str) -> list[str]:
    cols = [h.strip().lower() for h in header]
    n = len(REQUIRED_COLUMNS)
    if tuple(cols[:n]) != REQUIRED_COLUMNS:
        raise LedgerFormatError(
            f"header must start with {','.join(REQUIRED_COLUMNS)}; got {','.join(cols)}", where
        )
    # Optional columns may be omitted but keep their relative order.
    pos = 0
    for col in cols[n:]:
        if col not in OPTIONAL_COLUMNS[pos:]:
            raise LedgerFormatError(f"unexpected header column {col!r}", where)
        pos = OPTIONAL_COLUMNS.index(col) + 1
    return cols


def ingest(
    source: str | Path | io.TextIOBase,
    mapping: Mapping,
    core: FrameworkCore,
    default_currency: str = DEFAULT_CURRENCY,
    source_name: str | None = None,
) -> tuple[list[CostRecord], list[Finding]]:
    """Parse a ledger into accepted records and per-row findings.

    ``source`` may be CSV text, a path, or an open text stream. Warnings
    from :func:`classify` are reported as findings of severity "warning".
    """
    if isinstance(source, Path):
        try:
            text = source.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise LedgerFormatError(f"cannot read ledger: {exc}", str(source)) from exc
        source_name = source_name or str(source)
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
    source_name = source_name or "<ledger>"

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise LedgerFormatError("empty ledger (no header)", source_name) from None
    cols = _check_header(header, f"{source_name}:1")

    records: list[CostRecord] = []
    findings: list[Finding] = []
    currencies: dict[str, int] = {}

    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        rejects: list[tuple[str, str]] = []
        values = [c.strip() for c in row]
        if len(values) != len(cols):
            amount_guess = None
            if len(values) > 4:
                try:
                    amount_guess = int(values[4])
                except ValueError:
                    pass
            findings.append(
                Finding("WRONG_FIELD_COUNT", f"expected {len(cols)} fields, got {len(values)}",
                        row=line, amount_minor=amount_guess)
            )
            continue
        f = dict(zip(cols, values))

        amount: int | None
        try:
            amount = int(f["amount_minor"])
        except ValueError:
            amount = None
            rejects.append(("BAD_AMOUNT", f"amount_minor {f['amount_minor']!r} is not an integer"))
        if amount is not None and amount < 0:
            rejects.append(("NEGATIVE_AMOUNT", f"amount_minor {amount} is negative"))

        period = None
        try:
            period = Period.parse(f["period"])
        except ValueError as exc:
            rejects.append(("BAD_PERIOD", str(exc)))

        scope = kind = audience = None
        try:
            scope = _enum_value(Scope, f["scope"])
        except ValueError:
            rejects.append(("BAD_SCOPE", f"unknown scope {f['scope']!r}"))
        try:
            kind = _enum_value(CostKind, f["cost_kind"])
        except ValueError:
            rejects.append(("BAD_COST_KIND", f"unknown cost_kind {f['cost_kind']!r}"))
        if f["audience"]:
            try:
                audience = _enum_value(Audience, f["audience"])
            except ValueError:
                rejects.append(("BAD_AUDIENCE", f"unknown audience {f['audience']!r}"))

        currency = f.get("currency") or default_currency
        if not _CURRENCY_RE.match(currency):
            rejects.append(("BAD_CURRENCY", f"currency {currency!r} is not a 3-letter code"))

        sid = None
        if f["subcategory"]:
            try:
                sid = SubcategoryId.parse(f["subcategory"])
            except ValueError:
                sid = None
            if sid is None or sid not in core:
                rejects.append(("UNKNOWN_SUBCATEGORY", f"unknown subcategory {f['subcategory']!r}"))
                sid = None
        if scope is not None and scope is not Scope.DEVELOPMENT:
            if not f["subcategory"]:
                rejects.append(("MISSING_SUBCATEGORY", f"{scope.value} records need a subcategory"))
            elif sid is not None:
                entry = mapping.get(sid)
                if entry is None:
                    rejects.append(("UNMAPPED_SUBCATEGORY", f"{sid} has no mapping entry"))
                elif f["facet"]:
                    try:
                        entry.facet(f["facet"])
                    except NotFoundError as exc:
                        rejects.append(("UNKNOWN_FACET", str(exc)))

        if rejects:
            for i, (code, msg) in enumerate(rejects):
                findings.append(Finding(code, msg, row=line, amount_minor=amount if i == 0 else None))
            continue

        record = CostRecord(
            period=period,
            subcategory_id=sid,
            amount=Money(amount, currency),
            cost_kind=kind,
            scope=scope,
            facet=f["facet"] or None,
            audience=audience,
            memo=f.get("memo") or None,
        )
        records.append(record)
        currencies[currency] = currencies.get(currency, 0) + 1
        for code in classify(record, mapping).warnings:
            findings.append(Finding(code, _WARNING_TEXT[code].format(sid=sid), severity="warning", row=line))

    if len(currencies) > 1:
        listed = ", ".join(f"{c} ({n} rows)" for c, n in sorted(currencies.items()))
        findings.append(Finding(MIXED_CURRENCY, f"more than one currency: {listed}"))
    return records, findings


_WARNING_TEXT = {
    MISSING_FACET: "{sid} is a split subcategory charged without a facet; first-listed category used",
    MISSING_AUDIENCE: "{sid} needs an Internal/External audience; charged to Rework",
    DETECT_CHARGED_AS_FAILURE: "{sid} is a Detect subcategory charged as a failure cost",
    FAILURE_OUTSIDE_MAPPING: "{sid} charged to a failure category the mapping does not list",
}


def read_ledger(
    path: str | Path, mapping: Mapping, core: FrameworkCore, default_currency: str = DEFAULT_CURRENCY
) -> tuple[list[CostRecord], list[Finding]]:
    return ingest(Path(path), mapping, core, default_currency)


def rejected_amount(findings: Iterable[Finding]) -> int:
    """Total minor units on rejected rows (each rejected row counted once)."""
    return sum(f.amount_minor for f in findings if f.severity == "error" and f.amount_minor is not None)


def has_errors(findings: Iterable[Finding]) -> bool:
    return any(f.severity == "error" for f in findings)
