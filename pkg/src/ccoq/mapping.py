"""CSF subcategory to quality-cost category mapping.

Mapping file records::

    <id> | <category>[,<category>]* | [facets: f=<category>,...] | [flags: audience_required, detect_caution] | [note: <text>] | provenance: <PaperAnnotated|Provisional>

Fields after the category list are recognized by their prefix and may be
omitted. ``# name:`` and ``# version:`` comment lines set the mapping's
name and version.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import FormatError, NotFoundError
from .framework_core import FrameworkCore, Subcategory, SubcategoryId, as_id


class QualityCostCategory(str, enum.Enum):
    PREVENTION = "Prevention"
    APPRAISAL = "Appraisal"
    INTERNAL_FAILURE = "InternalFailure"
    EXTERNAL_FAILURE = "ExternalFailure"

    @property
    def is_conformance(self) -> bool:
        return self in CONFORMANCE

    @property
    def is_failure(self) -> bool:
        return self in NONCONFORMANCE


P = QualityCostCategory.PREVENTION
A = QualityCostCategory.APPRAISAL
IF = QualityCostCategory.INTERNAL_FAILURE
EF = QualityCostCategory.EXTERNAL_FAILURE

CONFORMANCE = frozenset({P, A})
# Also called the cost of rework.
NONCONFORMANCE = frozenset({IF, EF})
FAILURES = NONCONFORMANCE


class Provenance(str, enum.Enum):
    PAPER_ANNOTATED = "PaperAnnotated"
    PROVISIONAL = "Provisional"


class MappingError(FormatError):
    pass


_FACET_RE = re.compile(r"^[a-z][a-z0-9_-]*$")


@dataclass(frozen=True)
class Facet:
    facet_id: str
    category: QualityCostCategory
    description: str = ""


@dataclass(frozen=True)
class MappingEntry:
    subcategory_id: SubcategoryId
    categories: tuple[QualityCostCategory, ...]
    facets: tuple[Facet, ...] = ()
    audience_required: bool = False
    detect_caution: bool = False
    note: str | None = None
    provenance: Provenance = Provenance.PROVISIONAL

    @property
    def category_set(self) -> frozenset[QualityCostCategory]:
        return frozenset(self.categories)

    def facet(self, facet_id: str) -> Facet:
        for f in self.facets:
            if f.facet_id == facet_id:
                return f
        raise NotFoundError(
            f"{self.subcategory_id} has no facet {facet_id!r}",
            tuple(f.facet_id for f in self.facets),
        )

    def problems(self) -> list[str]:
        """Invariant violations for this entry; empty when valid."""
        out = []
        if not self.categories:
            out.append(f"{self.subcategory_id}: empty category set")
        if len(set(self.categories)) != len(self.categories):
            out.append(f"{self.subcategory_id}: category listed twice")
        if self.facets:
            ids = [f.facet_id for f in self.facets]
            if len(ids) != len(set(ids)):
                out.append(f"{self.subcategory_id}: duplicate facet id")
            for f in self.facets:
                if not _FACET_RE.match(f.facet_id):
                    out.append(f"{self.subcategory_id}: facet id {f.facet_id!r} is not a lowercase token")
                if f.category not in self.category_set:
                    out.append(
                        f"{self.subcategory_id}: facet {f.facet_id!r} category {f.category.value} "
                        "is outside the entry's categories"
                    )
            if {f.category for f in self.facets} != self.category_set:
                out.append(f"{self.subcategory_id}: facet categories do not cover the entry's categories")
        if self.audience_required and not FAILURES <= self.category_set:
            out.append(
                f"{self.subcategory_id}: audience_required needs both InternalFailure and ExternalFailure"
            )
        if self.detect_caution and self.subcategory_id.function_code != "DE":
            out.append(f"{self.subcategory_id}: detect_caution is only valid for DE subcategories")
        return out


@dataclass(frozen=True)
class Mapping:
    entries: tuple[MappingEntry, ...] = ()
    name: str = ""
    version: str = ""

    @cached_property
    def _index(self) -> dict[SubcategoryId, MappingEntry]:
        return {e.subcategory_id: e for e in self.entries}

    def get(self, id: SubcategoryId | str) -> MappingEntry | None:
        return self._index.get(as_id(id))

    def entry(self, id: SubcategoryId | str) -> MappingEntry:
        sid = as_id(id)
        found = self._index.get(sid)
        if found is None:
            raise NotFoundError(f"no mapping entry for {sid}")
        return found

    def __contains__(self, id: object) -> bool:
        try:
            return self.get(id) is not None  # type: ignore[arg-type]
        except ValueError:
            return False

    def __len__(self) -> int:
        return len(self.entries)


def _parse_category(token: str, where: str) -> QualityCostCategory:
    try:
        return QualityCostCategory(token.strip())
    except ValueError:
        raise MappingError(f"unknown quality cost category {token.strip()!r}", where) from None


def _parse_record(line: str, where: str) -> MappingEntry:
    fields = [f.strip() for f in line.split("|")]
    try:
        sid = SubcategoryId.parse(fields[0])
    except ValueError as exc:
        raise MappingError(str(exc), where) from None
    cat_field = fields[1] if len(fields) > 1 else ""
    categories = tuple(_parse_category(t, where) for t in cat_field.split(",") if t.strip())
    if not categories:
        raise MappingError(f"{sid}: empty category set", where)

    facets: list[Facet] = []
    audience_required = detect_caution = False
    note = None
    provenance = Provenance.PROVISIONAL
    for item in fields[2:]:
        if not item:
            continue
        key, sep, value = item.partition(":")
        key = key.strip().lower()
        if sep and key == "facets":
            for pair in value.split(","):
                if not pair.strip():
                    continue
                fid, eq, cat = pair.partition("=")
                if not eq:
                    raise MappingError(f"{sid}: facet {pair.strip()!r} needs '<facet>=<category>'", where)
                facets.append(Facet(fid.strip(), _parse_category(cat, where)))
        elif sep and key == "flags":
            for flag in value.split(","):
                flag = flag.strip()
                if flag == "audience_required":
                    audience_required = True
                elif flag == "detect_caution":
                    detect_caution = True
                elif flag:
                    raise MappingError(f"{sid}: unknown flag {flag!r}", where)
        elif sep and key == "note":
            note = value.strip() or None
        elif sep and key == "provenance":
            try:
                provenance = Provenance(value.strip())
            except ValueError:
                raise MappingError(f"{sid}: unknown provenance {value.strip()!r}", where) from None
        elif re.fullmatch(r"(audience_required|detect_caution)\s*=\s*(true|false)", item, re.I):
            flag, _, val = item.partition("=")
            on = val.strip().lower() == "true"
            if flag.strip() == "audience_required":
                audience_required = on
            else:
                detect_caution = on
        else:
            raise MappingError(f"{sid}: unrecognized field {item!r}", where)

    entry = MappingEntry(sid, categories, tuple(facets), audience_required, detect_caution, note, provenance)
    problems = entry.problems()
    if problems:
        raise MappingError("; ".join(problems), where)
    return entry


def load_mapping(source: str, core: FrameworkCore, source_name: str = "<mapping>") -> Mapping:
    """Parse mapping text and check every entry against ``core``."""
    entries: list[MappingEntry] = []
    seen: dict[SubcategoryId, int] = {}
    meta = {"name": "", "version": ""}
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        where = f"{source_name}:{lineno}"
        if not line:
            continue
        if line.startswith("#"):
            m = re.match(r"#\s*(name|version):\s*(.*)$", line)
            if m:
                meta[m.group(1)] = m.group(2).strip()
            continue
        entry = _parse_record(line, where)
        if entry.subcategory_id not in core:
            raise MappingError(f"unknown subcategory id {entry.subcategory_id}", where)
        if entry.subcategory_id in seen:
            raise MappingError(
                f"duplicate entry for {entry.subcategory_id} (first at line {seen[entry.subcategory_id]})", where
            )
        seen[entry.subcategory_id] = lineno
        entries.append(entry)
    return Mapping(tuple(entries), meta["name"], meta["version"])


def format_mapping(mapping: Mapping) -> str:
    lines = []
    if mapping.name:
        lines.append(f"# name: {mapping.name}")
    if mapping.version:
        lines.append(f"# version: {mapping.version}")
    for e in mapping.entries:
        parts = [str(e.subcategory_id), ", ".join(c.value for c in e.categories)]
        if e.facets:
            parts.append("facets: " + ", ".join(f"{f.facet_id}={f.category.value}" for f in e.facets))
        flags = [n for n, on in (("audience_required", e.audience_required), ("detect_caution", e.detect_caution)) if on]
        if flags:
            parts.append("flags: " + ", ".join(flags))
        if e.note:
            parts.append(f"note: {e.note}")
        parts.append(f"provenance: {e.provenance.value}")
        lines.append(" | ".join(parts))
    return "\n".join(lines) + "\n"


def read_mapping(path: str | Path, core: FrameworkCore) -> Mapping:
    path = Path(path)
    return load_mapping(path.read_text(encoding="utf-8"), core, source_name=str(path))


def shipped_mapping(core: FrameworkCore) -> Mapping:
    text = resources.files("ccoq.data").joinpath("csf_coq_mapping.txt").read_text(encoding="utf-8")
    return load_mapping(text, core, source_name="csf_coq_mapping.txt")


def categories_of(
    mapping: Mapping, id: SubcategoryId | str, facet: str | None = None
) -> frozenset[QualityCostCategory]:
    entry = mapping.entry(id)
    if facet is None:
        return entry.category_set
    return frozenset({entry.facet(facet).category})


def coverage_check(mapping: Mapping, core: FrameworkCore) -> list[SubcategoryId]:
    """Core subcategories without a mapping entry, in core order."""
    return [sid for sid in core.ids() if mapping.get(sid) is None]


# Keyword heuristic -------------------------------------------------------------

DEFAULT_KEYWORDS = ("audit", "assess", "verify", "test", "review", "monitor")

_SUFFIXES = r"(?:s|es|ed|ing|ment|ments|ion|ions|or|ors)?"


def _keyword_pattern(keywords: Iterable[str]) -> re.Pattern[str]:
    alts = []
    for kw in keywords:
        kw = kw.strip().lower()
        if not kw:
            continue
        if kw.endswith("y"):
            # verify -> verifies, verified, verifying, verification
            stem = re.escape(kw[:-1])
            alts.append(f"{stem}(?:y|ies|ied|ying|ication|ications)")
        else:
            alts.append(re.escape(kw) + _SUFFIXES)
    return re.compile(r"\b(?:" + "|".join(alts) + r")\b", re.IGNORECASE)


_DEFAULT_PATTERN = _keyword_pattern(DEFAULT_KEYWORDS)


def keyword_suggest(
    description: str, keywords: Iterable[str] | None = None
) -> QualityCostCategory | None:
    """Suggest Appraisal when an appraisal keyword appears in ``description``.

    Used only to seed Provisional rows.
    """
    pattern = _DEFAULT_PATTERN if keywords is None else _keyword_pattern(keywords)
    return A if pattern.search(description) else None


def provisional_entry(sub: Subcategory, keywords: Iterable[str] | None = None) -> MappingEntry:
    """Function-level default entry for a subcategory the annotations don't cover.

    ID/PR rows are Prevention unless an appraisal keyword fires; DE rows are
    Appraisal with the detect caution; RS/RC rows are both failure
    categories with audience_required.
    """
    func = sub.id.function_code
    if func in ("ID", "PR"):
        return MappingEntry(sub.id, (keyword_suggest(sub.description, keywords) or P,))
    if func == "DE":
        return MappingEntry(sub.id, (A,), detect_caution=True)
    return MappingEntry(sub.id, (IF, EF), audience_required=True)


# Critical Security Controls examples --------------------------------------------


@dataclass(frozen=True)
class CscExample:
    control_number: int
    title: str
    roles: dict[QualityCostCategory, str]

    def __hash__(self) -> int:
        return hash(self.control_number)


def parse_csc(source: str, source_name: str = "<csc>") -> list[CscExample]:
    """Parse ``<n> | <title> | <category> | <activity>`` lines, one per role."""
    titles: dict[int, str] = {}
    roles: dict[int, dict[QualityCostCategory, str]] = {}
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        where = f"{source_name}:{lineno}"
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split("|")]
        if len(fields) != 4:
            raise FormatError("expected '<n> | <title> | <category> | <activity>'", where)
        try:
            number = int(fields[0])
        except ValueError:
            raise FormatError(f"bad control number {fields[0]!r}", where) from None
        if not 1 <= number <= 20:
            raise FormatError(f"control number {number} outside 1-20", where)
        category = _parse_category(fields[2], where)
        titles.setdefault(number, fields[1])
        per = roles.setdefault(number, {})
        if category in per:
            raise FormatError(f"CSC {number} lists {category.value} twice", where)
        per[category] = fields[3]
    return [CscExample(n, titles[n], roles[n]) for n in sorted(roles)]


def csc_examples() -> list[CscExample]:
    """Critical Security Control activities per quality-cost category."""
    text = resources.files("ccoq.data").joinpath("csc_examples.txt").read_text(encoding="utf-8")
    return parse_csc(text, "csc_examples.txt")
