"""Two-rater agreement on multi-label mapping sheets (Cohen's kappa).

Raters may give a subcategory several labels. Before analysis a rater's
simultaneous internal- and external-failure marks collapse into the
combined label ``IF_EF_COMBINED``. Each subcategory then expands into one
or more unit ratings (see :func:`expand_units`), and kappa is computed over
the 5x5 contingency table of those units.

Rating-sheet files hold ``<subcategory-id> | <label>[,<label>]*`` records
with labels P, A, IF, EF, IF+EF.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping as TMapping, Sequence

from .errors import CcoqError, FormatError
from .framework_core import SubcategoryId, as_id
from .metrics import format_fraction


class RatingLabel(enum.Enum):
    P = "P"
    A = "A"
    IF = "IF"
    EF = "EF"
    IF_EF_COMBINED = "IF+EF"

    @property
    def rank(self) -> int:
        return _RANK[self]

    @classmethod
    def parse(cls, token: str) -> RatingLabel:
        token = token.strip().upper()
        if token in ("IF_EF_COMBINED", "IF+EF"):
            return cls.IF_EF_COMBINED
        try:
            return cls(token)
        except ValueError:
            raise ValueError(f"unknown rating label {token!r}") from None


LABELS = tuple(RatingLabel)
_RANK = {label: i for i, label in enumerate(LABELS)}


def normalize(labels: Iterable[RatingLabel]) -> frozenset[RatingLabel]:
    """Collapse {IF, EF} into the combined label.

    A set that already carries the combined label absorbs stray IF/EF marks.
    """
    s = set(labels)
    if not s:
        raise CcoqError("empty label set")
    if {RatingLabel.IF, RatingLabel.EF} <= s or (
        RatingLabel.IF_EF_COMBINED in s and s & {RatingLabel.IF, RatingLabel.EF}
    ):
        s -= {RatingLabel.IF, RatingLabel.EF}
        s.add(RatingLabel.IF_EF_COMBINED)
    return frozenset(s)


def _canonical(labels: Iterable[RatingLabel]) -> list[RatingLabel]:
    return sorted(labels, key=_RANK.__getitem__)


@dataclass(frozen=True)
class RaterSheet:
    rater_id: str
    ratings: dict[SubcategoryId, frozenset[RatingLabel]]

    @classmethod
    def build(cls, rater_id: str, ratings: TMapping[SubcategoryId | str, Iterable[RatingLabel | str]]) -> RaterSheet:
        out = {}
        for key, labels in ratings.items():
            parsed = [RatingLabel.parse(x) if isinstance(x, str) else x for x in labels]
            out[as_id(key)] = normalize(parsed)
        return cls(rater_id, out)

    def ids(self) -> list[SubcategoryId]:
        return sorted(self.ratings, key=SubcategoryId.sort_key)


def parse_sheet(source: str, rater_id: str = "", source_name: str = "<sheet>") -> RaterSheet:
    ratings: dict[SubcategoryId, frozenset[RatingLabel]] = {}
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        where = f"{source_name}:{lineno}"
        if not line or line.startswith("#"):
            continue
        head, sep, tail = line.partition("|")
        if not sep:
            raise FormatError("expected '<subcategory-id> | <label>[,<label>]*'", where)
        try:
            sid = SubcategoryId.parse(head)
            labels = [RatingLabel.parse(t) for t in tail.split(",") if t.strip()]
        except ValueError as exc:
            raise FormatError(str(exc), where) from None
        if not labels:
            raise FormatError(f"{sid}: empty label set", where)
        if sid in ratings:
            raise FormatError(f"{sid} rated twice", where)
        ratings[sid] = normalize(labels)
    return RaterSheet(rater_id or source_name, ratings)


def read_sheet(path: str | Path) -> RaterSheet:
    path = Path(path)
    return parse_sheet(path.read_text(encoding="utf-8"), rater_id=path.stem, source_name=str(path))


def format_sheet(sheet: RaterSheet) -> str:
    lines = [f"# rater: {sheet.rater_id}"]
    for sid in sheet.ids():
        lines.append(f"{sid} | {','.join(l.value for l in _canonical(sheet.ratings[sid]))}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class UnitRating:
    subcategory_id: SubcategoryId
    label_a: RatingLabel
    label_b: RatingLabel

    @property
    def agrees(self) -> bool:
        return self.label_a is self.label_b


def _check_same_ids(a: RaterSheet, b: RaterSheet) -> list[SubcategoryId]:
    only_a = set(a.ratings) - set(b.ratings)
    only_b = set(b.ratings) - set(a.ratings)
    if only_a or only_b:
        parts = []
        if only_a:
            parts.append(f"only in {a.rater_id}: {', '.join(map(str, sorted(only_a)))}")
        if only_b:
            parts.append(f"only in {b.rater_id}: {', '.join(map(str, sorted(only_b)))}")
        raise CcoqError("rater sheets cover different ids (" + "; ".join(parts) + ")")
    return a.ids()


def expand_pair(sid: SubcategoryId, sa: frozenset[RatingLabel], sb: frozenset[RatingLabel]) -> list[UnitRating]:
    """Units for one subcategory.

    Shared labels give one agreement unit each. The unmatched labels of the
    two sides, in canonical order, pair off into disagreement units; any
    left over on one side pair with the other side's canonically first label.
    """
    if not sa or not sb:
        raise CcoqError(f"{sid}: empty label set")
    shared = _canonical(sa & sb)
    units = [UnitRating(sid, lab, lab) for lab in shared]
    rest_a = _canonical(sa - sb)
    rest_b = _canonical(sb - sa)
    n = min(len(rest_a), len(rest_b))
    units += [UnitRating(sid, x, y) for x, y in zip(rest_a[:n], rest_b[:n])]
    first_a = _canonical(sa)[0]
    first_b = _canonical(sb)[0]
    units += [UnitRating(sid, x, first_b) for x in rest_a[n:]]
    units += [UnitRating(sid, first_a, y) for y in rest_b[n:]]
    return units


def expand_units(sheet_a: RaterSheet, sheet_b: RaterSheet) -> list[UnitRating]:
    units: list[UnitRating] = []
    for sid in _check_same_ids(sheet_a, sheet_b):
        units += expand_pair(sid, normalize(sheet_a.ratings[sid]), normalize(sheet_b.ratings[sid]))
    return units


# Landis and Koch: each band's upper edge is inclusive.
BANDS = (
    (Fraction(0), "none"),
    (Fraction(1, 5), "slight"),
    (Fraction(2, 5), "fair"),
    (Fraction(3, 5), "moderate"),
    (Fraction(4, 5), "substantial"),
    (Fraction(1), "almost perfect"),
)
DEGENERATE_BAND = "undefined"


def interpret_kappa(kappa: Fraction | float | str) -> str:
    """Landis-Koch band for ``kappa``; zero and negative values are "none"."""
    value = Fraction(kappa) if not isinstance(kappa, Fraction) else kappa
    if value > 1:
        raise ValueError(f"kappa {kappa} exceeds 1")
    for upper, label in BANDS:
        if value <= upper:
            return label
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class AgreementResult:
    unit_count: int
    observed_agreement: Fraction
    expected_agreement: Fraction
    kappa: Fraction | None  # None when chance agreement is 1
    band: str
    table: tuple[tuple[int, ...], ...]
    disagreements: tuple[tuple[SubcategoryId, frozenset[RatingLabel], frozenset[RatingLabel]], ...] = ()

    @property
    def degenerate(self) -> bool:
        return self.kappa is None

    @property
    def kappa_text(self) -> str:
        return "undefined" if self.kappa is None else format_fraction(self.kappa, 2)


def contingency_table(units: Sequence[UnitRating]) -> list[list[int]]:
    table = [[0] * len(LABELS) for _ in LABELS]
    for u in units:
        table[_RANK[u.label_a]][_RANK[u.label_b]] += 1
    return table


def cohen_kappa(units: Sequence[UnitRating], disagreement_list: Iterable = ()) -> AgreementResult:
    """Cohen's kappa over unit ratings, in exact rational arithmetic."""
    if not units:
        raise CcoqError("cohen_kappa needs at least one unit")
    table = contingency_table(units)
    n = len(units)
    k = len(LABELS)
    p_o = Fraction(sum(table[i][i] for i in range(k)), n)
    rows = [sum(table[i]) for i in range(k)]
    cols = [sum(table[i][j] for i in range(k)) for j in range(k)]
    p_e = Fraction(sum(r * c for r, c in zip(rows, cols)), n * n)
    if p_e == 1:
        kappa, band = None, DEGENERATE_BAND
    else:
        kappa = (p_o - p_e) / (1 - p_e)
        band = interpret_kappa(kappa)
    return AgreementResult(
        unit_count=n,
        observed_agreement=p_o,
        expected_agreement=p_e,
        kappa=kappa,
        band=band,
        table=tuple(tuple(r) for r in table),
        disagreements=tuple(disagreement_list),
    )


def disagreements(
    sheet_a: RaterSheet, sheet_b: RaterSheet
) -> list[tuple[SubcategoryId, frozenset[RatingLabel], frozenset[RatingLabel]]]:
    """Ids whose normalized label sets differ: the consensus worklist."""
    out = []
    for sid in _check_same_ids(sheet_a, sheet_b):
        sa, sb = normalize(sheet_a.ratings[sid]), normalize(sheet_b.ratings[sid])
        if sa != sb:
            out.append((sid, sa, sb))
    return out


def analyze(sheet_a: RaterSheet, sheet_b: RaterSheet) -> AgreementResult:
    """Expand, compute kappa, and attach the disagreement list."""
    return cohen_kappa(expand_units(sheet_a, sheet_b), disagreements(sheet_a, sheet_b))


def format_labels(labels: Iterable[RatingLabel]) -> str:
    return ",".join(l.value for l in _canonical(labels))
