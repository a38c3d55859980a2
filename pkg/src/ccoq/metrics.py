"""Cost-of-quality algebra, scope split, ratios, trends, Pareto tables, ROSI.

All money is integer minor units. Percentages are exact fractions until
presentation, where :func:`largest_remainder` rounds them so a report's
column sums to exactly 100.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .errors import CcoqError, MixedCurrencyError
from .ledger import DEFAULT_CURRENCY, Allocation, Bucket, CostRecord, Money, Period, Scope, classify
from .mapping import Mapping

BUCKET_FIELDS = {
    Bucket.PREVENTION: "prevention",
    Bucket.APPRAISAL: "appraisal",
    Bucket.INTERNAL_FAILURE: "internal_failure",
    Bucket.EXTERNAL_FAILURE: "external_failure",
    Bucket.REWORK: "rework_fallback",
}
QUALITY_SCOPES = (Scope.CYBERSECURITY, Scope.ORDINARY_QUALITY)


@dataclass(frozen=True)
class CoqBreakdown:
    """Quality-cost totals in minor units of ``currency``.

    ``rework_fallback`` holds failure costs charged without an internal or
    external audience; it counts toward nonconformance only.
    """

    prevention: int = 0
    appraisal: int = 0
    internal_failure: int = 0
    external_failure: int = 0
    rework_fallback: int = 0
    currency: str = DEFAULT_CURRENCY

    @property
    def conformance(self) -> int:
        return self.prevention + self.appraisal

    @property
    def nonconformance(self) -> int:
        return self.internal_failure + self.external_failure + self.rework_fallback

    @property
    def rework(self) -> int:
        """The simpler rework model: every failure cost in one category."""
        return self.nonconformance

    @property
    def total(self) -> int:
        return self.conformance + self.nonconformance

    def money(self, name: str) -> Money:
        return Money(getattr(self, name), self.currency)

    def bucket(self, bucket: Bucket) -> int:
        return getattr(self, BUCKET_FIELDS[bucket])

    def __add__(self, other: CoqBreakdown) -> CoqBreakdown:
        if not isinstance(other, CoqBreakdown):
            return NotImplemented
        if other.currency != self.currency:
            raise MixedCurrencyError(f"cannot add {self.currency} and {other.currency} breakdowns")
        return CoqBreakdown(
            self.prevention + other.prevention,
            self.appraisal + other.appraisal,
            self.internal_failure + other.internal_failure,
            self.external_failure + other.external_failure,
            self.rework_fallback + other.rework_fallback,
            self.currency,
        )

    def as_dict(self) -> dict[str, int]:
        return {
            "prevention": self.prevention,
            "appraisal": self.appraisal,
            "internal_failure": self.internal_failure,
            "external_failure": self.external_failure,
            "rework_fallback": self.rework_fallback,
            "conformance": self.conformance,
            "nonconformance": self.nonconformance,
            "total": self.total,
        }


def _currency_of(amounts: Iterable[Money], default: str | None) -> str:
    seen = {m.currency for m in amounts}
    if len(seen) > 1:
        raise MixedCurrencyError(f"mixed currencies: {', '.join(sorted(seen))}")
    if seen:
        (cur,) = seen
        if default is not None and cur != default:
            raise MixedCurrencyError(f"records are {cur}, expected {default}")
        return cur
    return default or DEFAULT_CURRENCY


def _scope_filter(scope: Scope | Iterable[Scope] | None) -> frozenset[Scope]:
    if scope is None:
        return frozenset(QUALITY_SCOPES)
    if isinstance(scope, Scope):
        return frozenset({scope})
    return frozenset(scope)


def coq(
    allocations: Iterable[Allocation],
    scope: Scope | Iterable[Scope] | None = None,
    currency: str | None = None,
) -> CoqBreakdown:
    """Sum allocations into a breakdown.

    ``scope`` selects Cybersecurity, OrdinaryQuality, or (default) both.
    Development allocations never enter a breakdown.
    """
    scopes = _scope_filter(scope)
    picked = [a for a in allocations if a.bucket is not None and a.record.scope in scopes]
    cur = _currency_of((a.record.amount for a in picked), currency)
    sums = dict.fromkeys(BUCKET_FIELDS.values(), 0)
    for a in picked:
        sums[BUCKET_FIELDS[a.bucket]] += a.record.amount.minor_units
    return CoqBreakdown(currency=cur, **sums)


@dataclass(frozen=True)
class DevelopmentCostSplit:
    ccoq: CoqBreakdown
    coq: CoqBreakdown
    development: int
    currency: str = DEFAULT_CURRENCY

    @property
    def total(self) -> int:
        return self.ccoq.total + self.coq.total + self.development


def development_split(
    records: Iterable[CostRecord], mapping: Mapping, currency: str | None = None
) -> DevelopmentCostSplit:
    """Partition records by scope into cyber CoQ, ordinary CoQ, and development."""
    records = list(records)
    cur = _currency_of((r.amount for r in records), currency)
    allocations = [classify(r, mapping) for r in records]
    development = sum(r.amount.minor_units for r in records if r.scope is Scope.DEVELOPMENT)
    return DevelopmentCostSplit(
        ccoq=coq(allocations, Scope.CYBERSECURITY, cur),
        coq=coq(allocations, Scope.ORDINARY_QUALITY, cur),
        development=development,
        currency=cur,
    )


# Percentages -----------------------------------------------------------------

def percent(part: int, whole: int) -> Fraction:
    if whole == 0:
        raise ZeroDivisionError("percentage of a zero total")
    return Fraction(100 * part, whole)


def largest_remainder(values: Sequence[Fraction], places: int = 2, total: int = 100) -> list[Decimal]:
    """Round percentages to ``places`` decimals keeping their sum at ``total``.

    Values that do not already sum to ``total`` (e.g. all zero) are rounded
    half-even individually.
    """
    if not values:
        return []
    quantum = Decimal(1).scaleb(-places)
    if sum(values) != total:
        return [Decimal(format_fraction(v, places)) for v in values]
    scale = 10**places
    floors = [(v * scale).numerator // (v * scale).denominator for v in values]
    remainders = [v * scale - f for v, f in zip(values, floors)]
    short = total * scale - sum(floors)
    # Largest remainder first; ties go to the earlier position.
    order = sorted(range(len(values)), key=lambda i: (-remainders[i], i))
    for i in order[:short]:
        floors[i] += 1
    return [Decimal(f).scaleb(-places).quantize(quantum) for f in floors]


def format_fraction(value: Fraction, places: int = 2) -> str:
    quantum = Decimal(1).scaleb(-places)
    return str((Decimal(value.numerator) / Decimal(value.denominator)).quantize(quantum, ROUND_HALF_EVEN))


@dataclass(frozen=True)
class RatioSet:
    """Exact percentage views of a :class:`DevelopmentCostSplit`."""

    ccoq_pct: Fraction
    coq_pct: Fraction
    development_pct: Fraction
    ccoq_buckets: dict[str, Fraction]
    coq_buckets: dict[str, Fraction]

    def rounded(self, places: int = 2) -> dict[str, dict[str, Decimal] | Decimal]:
        top = largest_remainder([self.ccoq_pct, self.coq_pct, self.development_pct], places)
        out: dict[str, dict[str, Decimal] | Decimal] = {
            "ccoq_pct": top[0],
            "coq_pct": top[1],
            "development_pct": top[2],
        }
        for name, buckets in (("ccoq_buckets", self.ccoq_buckets), ("coq_buckets", self.coq_buckets)):
            keys = list(buckets)
            out[name] = dict(zip(keys, largest_remainder([buckets[k] for k in keys], places)))
        return out


def _bucket_shares(b: CoqBreakdown) -> dict[str, Fraction]:
    names = list(BUCKET_FIELDS.values())
    if b.total == 0:
        return {n: Fraction(0) for n in names}
    return {n: percent(getattr(b, n), b.total) for n in names}


def ratios(split: DevelopmentCostSplit) -> RatioSet:
    if split.total <= 0:
        raise CcoqError("ratios need a positive total development cost")
    return RatioSet(
        ccoq_pct=percent(split.ccoq.total, split.total),
        coq_pct=percent(split.coq.total, split.total),
        development_pct=percent(split.development, split.total),
        ccoq_buckets=_bucket_shares(split.ccoq),
        coq_buckets=_bucket_shares(split.coq),
    )


# Trends ------------------------------------------------------------------------

class Granularity(str, enum.Enum):
    MONTHLY = "Monthly"
    QUARTERLY = "Quarterly"

    @classmethod
    def parse(cls, text: str) -> Granularity:
        key = text.strip().lower()
        if key in ("m", "month", "monthly"):
            return cls.MONTHLY
        if key in ("q", "quarter", "quarterly"):
            return cls.QUARTERLY
        raise ValueError(f"unknown granularity {text!r}")


@dataclass(frozen=True, order=True)
class PeriodKey:
    year: int
    sub: int  # month or quarter number
    granularity: Granularity = field(compare=False)

    def __str__(self) -> str:
        if self.granularity is Granularity.QUARTERLY:
            return f"{self.year:04d}-Q{self.sub}"
        return f"{self.year:04d}-{self.sub:02d}"

    def next(self) -> PeriodKey:
        span = 4 if self.granularity is Granularity.QUARTERLY else 12
        return PeriodKey(self.year + self.sub // span, self.sub % span + 1, self.granularity)


def period_key(period: Period, granularity: Granularity) -> PeriodKey:
    if granularity is Granularity.QUARTERLY:
        return PeriodKey(period.year, period.quarter, granularity)
    return PeriodKey(period.year, period.month, granularity)


@dataclass(frozen=True)
class TrendPoint:
    period: PeriodKey
    breakdown: CoqBreakdown
    months_present: int = 1
    partial: bool = False


@dataclass(frozen=True)
class TrendSeries:
    granularity: Granularity
    points: tuple[TrendPoint, ...]

    def total(self) -> CoqBreakdown:
        cur = self.points[0].breakdown.currency if self.points else DEFAULT_CURRENCY
        acc = CoqBreakdown(currency=cur)
        for p in self.points:
            acc = acc + p.breakdown
        return acc


def trend(
    allocations: Iterable[Allocation],
    granularity: Granularity = Granularity.MONTHLY,
    scope: Scope | Iterable[Scope] | None = None,
    contiguous: bool = False,
    currency: str | None = None,
) -> TrendSeries:
    """One breakdown per period present in the data.

    A quarterly point is ``partial`` when fewer than three of its months
    appear in the data. With ``contiguous`` the gaps between first and last
    period become zero points.
    """
    scopes = _scope_filter(scope)
    picked = [a for a in allocations if a.bucket is not None and a.record.scope in scopes]
    cur = _currency_of((a.record.amount for a in picked), currency)
    groups: dict[PeriodKey, list[Allocation]] = defaultdict(list)
    months: dict[PeriodKey, set[Period]] = defaultdict(set)
    for a in picked:
        key = period_key(a.record.period, granularity)
        groups[key].append(a)
        months[key].add(a.record.period)

    keys = sorted(groups)
    if contiguous and keys:
        filled = [keys[0]]
        while filled[-1] < keys[-1]:
            filled.append(filled[-1].next())
        keys = filled

    points = []
    for key in keys:
        present = len(months.get(key, ()))
        partial = granularity is Granularity.QUARTERLY and present < 3
        points.append(TrendPoint(key, coq(groups.get(key, []), scopes, cur), present, partial))
    return TrendSeries(granularity, tuple(points))


# Pareto ------------------------------------------------------------------------

GROUPERS: dict[str, Callable[[Allocation], str]] = {
    "subcategory": lambda a: str(a.record.subcategory_id),
    "category": lambda a: a.record.subcategory_id.category_id,
    "function": lambda a: a.record.subcategory_id.function_code,
    "bucket": lambda a: a.bucket.value,
}


@dataclass(frozen=True)
class ParetoRow:
    key: str
    amount: int
    share: Fraction
    cumulative: Fraction


@dataclass(frozen=True)
class ParetoTable:
    group_by: str
    rows: tuple[ParetoRow, ...]
    currency: str = DEFAULT_CURRENCY

    @property
    def total(self) -> int:
        return sum(r.amount for r in self.rows)

    def rounded_shares(self, places: int = 2) -> list[Decimal]:
        return largest_remainder([r.share for r in self.rows], places)


def pareto(
    allocations: Iterable[Allocation],
    group_by: str = "subcategory",
    scope: Scope | Iterable[Scope] | None = None,
    currency: str | None = None,
) -> ParetoTable:
    """Groups ranked by amount (descending, ties by key) with cumulative share."""
    if group_by not in GROUPERS:
        raise ValueError(f"group_by must be one of {sorted(GROUPERS)}")
    scopes = _scope_filter(scope)
    picked = [a for a in allocations if a.bucket is not None and a.record.scope in scopes]
    if not picked:
        raise CcoqError("pareto needs at least one allocation")
    cur = _currency_of((a.record.amount for a in picked), currency)
    grouper = GROUPERS[group_by]
    sums: dict[str, int] = defaultdict(int)
    for a in picked:
        sums[grouper(a)] += a.record.amount.minor_units
    total = sum(sums.values())
    ordered = sorted(sums.items(), key=lambda kv: (-kv[1], kv[0]))
    rows = []
    running = 0
    for key, amount in ordered:
        running += amount
        if total:
            rows.append(ParetoRow(key, amount, percent(amount, total), percent(running, total)))
        else:
            rows.append(ParetoRow(key, amount, Fraction(0), Fraction(0)))
    return ParetoTable(group_by, tuple(rows), cur)


# ROSI and diagnostics ---------------------------------------------------------

def rosi(benefit: Money, cost: Money) -> Fraction:
    """Return on security investment in percent: (benefit - cost) / cost * 100."""
    if benefit.currency != cost.currency:
        raise MixedCurrencyError(f"benefit is {benefit.currency}, cost is {cost.currency}")
    if cost.minor_units <= 0:
        raise CcoqError("ROSI needs a positive cost")
    return Fraction(100 * (benefit.minor_units - cost.minor_units), cost.minor_units)


def format_percent(value: Fraction, places: int = 2) -> str:
    return format_fraction(value, places) + "%"


@dataclass(frozen=True)
class DiagnosticThresholds:
    """Heuristic defaults, not established benchmarks."""

    min_prevention_share_of_conformance: Fraction = Fraction(1, 2)
    flag_nonconformance_above_conformance: bool = True


def diagnostics(b: CoqBreakdown, thresholds: DiagnosticThresholds = DiagnosticThresholds()) -> list[str]:
    """Heuristic annotations for a breakdown (empty when nothing is flagged)."""
    notes = []
    if b.conformance and Fraction(b.prevention, b.conformance) < thresholds.min_prevention_share_of_conformance:
        notes.append(
            "heuristic: prevention is below "
            f"{format_percent(thresholds.min_prevention_share_of_conformance * 100, 0)} of conformance cost"
        )
    if thresholds.flag_nonconformance_above_conformance and b.nonconformance > b.conformance:
        notes.append("heuristic: nonconformance (rework) exceeds conformance cost")
    if b.total and b.internal_failure == 0 and b.appraisal > 0:
        notes.append("heuristic: no internal failures recorded; appraisal may not be rigorous enough")
    return notes
