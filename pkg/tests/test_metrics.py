import random
from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ccoq.errors import CcoqError, MixedCurrencyError
from ccoq.ledger import Audience, Bucket, Money, Scope, allocate, classify
from ccoq.metrics import (
    CoqBreakdown,
    DevelopmentCostSplit,
    Granularity,
    coq,
    development_split,
    diagnostics,
    format_percent,
    largest_remainder,
    pareto,
    ratios,
    rosi,
    trend,
)

from conftest import make_record

# One subcategory per bucket in the shipped mapping.
BUCKET_RECORD = {
    Bucket.PREVENTION: dict(sid="ID.AM-1"),
    Bucket.APPRAISAL: dict(sid="DE.CM-1"),
    Bucket.INTERNAL_FAILURE: dict(sid="RS.MI-1", audience=Audience.INTERNAL),
    Bucket.EXTERNAL_FAILURE: dict(sid="RS.MI-1", audience=Audience.EXTERNAL),
    Bucket.REWORK: dict(sid="RS.MI-1"),
}


def rec(bucket, amount, **kw):
    fields = dict(BUCKET_RECORD[bucket])
    sid = fields.pop("sid")
    fields.update(kw)
    return make_record(sid, amount, **fields)


def alloc(mapping, *records):
    return [classify(r, mapping) for r in records]


def test_bucket_fixtures(mapping):
    for bucket in BUCKET_RECORD:
        assert classify(rec(bucket, 1), mapping).bucket is bucket


class TestCoq:
    def test_example(self, mapping):
        b = coq(alloc(mapping, rec(Bucket.PREVENTION, 100), rec(Bucket.APPRAISAL, 50),
                      rec(Bucket.INTERNAL_FAILURE, 30), rec(Bucket.EXTERNAL_FAILURE, 20)))
        assert (b.conformance, b.nonconformance, b.total) == (150, 50, 200)
        assert b.rework == 50

    def test_empty(self):
        b = coq([])
        assert b == CoqBreakdown() and b.total == 0

    def test_rework_fallback(self, mapping):
        b = coq(alloc(mapping, rec(Bucket.REWORK, 40)))
        assert b.rework_fallback == 40 and b.nonconformance == 40 and b.internal_failure == 0

    def test_scope_filter(self, mapping):
        allocs = alloc(mapping, rec(Bucket.PREVENTION, 7), rec(Bucket.PREVENTION, 5, scope=Scope.ORDINARY_QUALITY),
                       make_record(None, 99, scope=Scope.DEVELOPMENT))
        assert coq(allocs).total == 12
        assert coq(allocs, Scope.CYBERSECURITY).total == 7
        assert coq(allocs, Scope.ORDINARY_QUALITY).total == 5

    def test_mixed_currency(self, mapping):
        with pytest.raises(MixedCurrencyError):
            coq(alloc(mapping, rec(Bucket.PREVENTION, 1), rec(Bucket.PREVENTION, 1, currency="EUR")))
        with pytest.raises(MixedCurrencyError):
            CoqBreakdown(currency="USD") + CoqBreakdown(currency="EUR")

    def test_money_view(self, mapping):
        b = coq(alloc(mapping, rec(Bucket.APPRAISAL, 3, currency="EUR")))
        assert b.money("appraisal") == Money(3, "EUR")


class TestSplit:
    def test_example(self, mapping):
        records = [rec(Bucket.PREVENTION, 100), rec(Bucket.APPRAISAL, 60, scope=Scope.ORDINARY_QUALITY),
                   make_record(None, 300, scope=Scope.DEVELOPMENT)]
        s = development_split(records, mapping)
        assert (s.ccoq.total, s.coq.total, s.development, s.total) == (100, 60, 300, 460)

    def test_random_oracle(self, mapping):
        rng = random.Random(7)
        records = []
        expect = {s: 0 for s in Scope}
        for _ in range(1000):
            scope = rng.choice(list(Scope))
            amount = rng.randint(0, 10**7)
            if scope is Scope.DEVELOPMENT:
                records.append(make_record(None, amount, scope=scope))
            else:
                records.append(rec(rng.choice(list(Bucket)), amount, scope=scope))
            expect[scope] += amount
        s = development_split(records, mapping)
        assert s.ccoq.total == expect[Scope.CYBERSECURITY]
        assert s.coq.total == expect[Scope.ORDINARY_QUALITY]
        assert s.development == expect[Scope.DEVELOPMENT]
        assert s.total == sum(expect.values())

    def test_ratios(self):
        split = DevelopmentCostSplit(CoqBreakdown(prevention=100), CoqBreakdown(appraisal=60), 300, "USD")
        r = ratios(split)
        assert r.ccoq_pct == Fraction(100 * 100, 460)
        rounded = r.rounded()
        assert rounded["ccoq_pct"] == Decimal("21.74")
        assert rounded["ccoq_pct"] + rounded["coq_pct"] + rounded["development_pct"] == 100

    def test_ratios_zero_total(self):
        with pytest.raises(CcoqError):
            ratios(DevelopmentCostSplit(CoqBreakdown(), CoqBreakdown(), 0, "USD"))


class TestLargestRemainder:
    def test_thirds(self):
        out = largest_remainder([Fraction(100, 3)] * 3)
        assert sum(out) == 100 and sorted(out) == [Decimal("33.33"), Decimal("33.33"), Decimal("33.34")]

    def test_all_zero(self):
        assert largest_remainder([Fraction(0)] * 3) == [Decimal("0.00")] * 3

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(0, 10**9), min_size=1, max_size=12).filter(lambda xs: sum(xs) > 0))
    def test_sums_to_100(self, parts):
        total = sum(parts)
        shares = [Fraction(100 * p, total) for p in parts]
        out = largest_remainder(shares)
        assert sum(out) == 100
        for exact, r in zip(shares, out):
            assert abs(Fraction(r) - exact) < Fraction(1, 100)


class TestTrend:
    def test_monthly(self, mapping):
        allocs = alloc(mapping, rec(Bucket.PREVENTION, 1, period="2024-01"), rec(Bucket.APPRAISAL, 2, period="2024-01"),
                       rec(Bucket.PREVENTION, 4, period="2024-03"))
        t = trend(allocs)
        assert [str(p.period) for p in t.points] == ["2024-01", "2024-03"]
        assert [p.breakdown.total for p in t.points] == [3, 4]

    def test_contiguous(self, mapping):
        allocs = alloc(mapping, rec(Bucket.PREVENTION, 1, period="2023-11"), rec(Bucket.PREVENTION, 4, period="2024-02"))
        t = trend(allocs, contiguous=True)
        assert [str(p.period) for p in t.points] == ["2023-11", "2023-12", "2024-01", "2024-02"]
        assert [p.breakdown.total for p in t.points] == [1, 0, 0, 4]

    def test_quarterly_partial(self, mapping):
        allocs = alloc(mapping, *[rec(Bucket.PREVENTION, 1, period=f"2024-{m:02d}") for m in (1, 2, 3, 4)])
        t = trend(allocs, Granularity.QUARTERLY)
        assert [(str(p.period), p.breakdown.total, p.partial) for p in t.points] == [
            ("2024-Q1", 3, False),
            ("2024-Q2", 1, True),
        ]

    def test_quarter_rollover(self, mapping):
        allocs = alloc(mapping, rec(Bucket.PREVENTION, 1, period="2023-12"), rec(Bucket.PREVENTION, 1, period="2024-04"))
        t = trend(allocs, Granularity.QUARTERLY, contiguous=True)
        assert [str(p.period) for p in t.points] == ["2023-Q4", "2024-Q1", "2024-Q2"]

    def test_granularity_parse(self):
        assert Granularity.parse("q") is Granularity.QUARTERLY
        assert Granularity.parse("Monthly") is Granularity.MONTHLY
        with pytest.raises(ValueError):
            Granularity.parse("weekly")


class TestPareto:
    def test_example(self, mapping):
        allocs = alloc(mapping, make_record("ID.AM-1", 50), make_record("ID.AM-2", 30), make_record("ID.AM-3", 20))
        t = pareto(allocs)
        assert [(r.key, r.amount) for r in t.rows] == [("ID.AM-1", 50), ("ID.AM-2", 30), ("ID.AM-3", 20)]
        assert [r.cumulative for r in t.rows] == [50, 80, 100]

    def test_tie_break(self, mapping):
        allocs = alloc(mapping, make_record("ID.GV-1", 10), make_record("ID.AM-1", 10))
        assert [r.key for r in pareto(allocs, "category").rows] == ["ID.AM", "ID.GV"]

    def test_empty(self):
        with pytest.raises(CcoqError):
            pareto([])

    def test_bad_group(self, mapping):
        with pytest.raises(ValueError):
            pareto(alloc(mapping, make_record("ID.AM-1", 1)), "colour")

    def test_random_oracle(self, mapping):
        rng = random.Random(11)
        ids = [str(e.subcategory_id) for e in mapping.entries]
        records = [make_record(rng.choice(ids), rng.randint(0, 10**6)) for _ in range(200)]
        t = pareto(alloc(mapping, *records), "function")
        oracle = {}
        for r in records:
            oracle[r.subcategory_id.function_code] = oracle.get(r.subcategory_id.function_code, 0) + r.amount.minor_units
        assert {r.key: r.amount for r in t.rows} == oracle
        amounts = [r.amount for r in t.rows]
        assert amounts == sorted(amounts, reverse=True)
        assert t.rows[-1].cumulative == 100
        assert sum(t.rounded_shares()) == 100


class TestRosi:
    @pytest.mark.parametrize("benefit, cost, text", [(150, 100, "50.00%"), (100, 100, "0.00%"), (80, 100, "-20.00%")])
    def test_values(self, benefit, cost, text):
        assert format_percent(rosi(Money(benefit), Money(cost))) == text

    def test_errors(self):
        with pytest.raises(CcoqError):
            rosi(Money(1), Money(0))
        with pytest.raises(MixedCurrencyError):
            rosi(Money(1, "EUR"), Money(1))


def test_diagnostics():
    assert diagnostics(CoqBreakdown()) == []
    notes = diagnostics(CoqBreakdown(prevention=1, appraisal=9, external_failure=20))
    assert len(notes) == 3 and all(n.startswith("heuristic:") for n in notes)


# Property suite ---------------------------------------------------------------

def random_allocations(rng: random.Random, mapping, n: int):
    records = []
    for _ in range(n):
        bucket = rng.choice(list(Bucket))
        scope = rng.choice((Scope.CYBERSECURITY, Scope.ORDINARY_QUALITY))
        period = f"{rng.choice((2023, 2024))}-{rng.randint(1, 12):02d}"
        records.append(rec(bucket, rng.randint(0, 10**12), scope=scope, period=period))
    return alloc(mapping, *records)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 40))
def test_algebra_properties(mapping, seed, n):
    rng = random.Random(seed)
    allocs = random_allocations(rng, mapping, n)
    b = coq(allocs)
    assert b.conformance + b.nonconformance == b.total
    assert b.prevention + b.appraisal + b.internal_failure + b.external_failure + b.rework_fallback == b.total
    assert b.total == sum(a.record.amount.minor_units for a in allocs)

    cut = rng.randint(0, n)
    assert coq(allocs[:cut]) + coq(allocs[cut:]) == b
    shuffled = list(allocs)
    rng.shuffle(shuffled)
    assert coq(shuffled) == b

    extra = alloc(mapping, rec(Bucket.APPRAISAL, rng.randint(0, 1000)))
    grown = coq(allocs + extra)
    assert grown.appraisal >= b.appraisal and grown.total >= b.total

    for g in Granularity:
        assert trend(allocs, g).total() == b
    assert coq(allocs, Scope.CYBERSECURITY) + coq(allocs, Scope.ORDINARY_QUALITY) == b
