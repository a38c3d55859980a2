"""NIST CSF v1.0 Framework Core: data model, text format, validation, lookup.

The core file is line oriented::

    # comment
    FUNCTION ID Identify
    CATEGORY AM Asset Management | <category description>
    ID.AM-1 | <description> | CCS_CSC: CSC 1; COBIT_5: BAI09.01, BAI09.02

Blank lines are ignored. Subcategory records belong to the most recent
CATEGORY header, which belongs to the most recent FUNCTION header.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterator

from .errors import Finding, FormatError, NotFoundError

FUNCTION_CODES = ("ID", "PR", "DE", "RS", "RC")
FUNCTION_NAMES = {
    "ID": "Identify",
    "PR": "Protect",
    "DE": "Detect",
    "RS": "Respond",
    "RC": "Recover",
}

_ID_RE = re.compile(r"^([A-Z]{2})\.([A-Z]{2,3})-(\d+)$")


class Standard(str, enum.Enum):
    """Informative-reference sources.

    ISA 62443 is a single standard family published in two parts, which the
    alternative view of the Framework Core lists as two columns; both parts
    are kept as separate members so each column round-trips.
    """

    CCS_CSC = "CCS_CSC"
    COBIT_5 = "COBIT_5"
    ISA_62443_2_1_2009 = "ISA_62443_2_1_2009"
    ISA_62443_3_3_2013 = "ISA_62443_3_3_2013"
    ISO_IEC_27001_2013 = "ISO_IEC_27001_2013"
    NIST_SP_800_53_R4 = "NIST_SP_800_53_R4"

    @property
    def family(self) -> str:
        return "ISA_62443" if self.name.startswith("ISA_62443") else self.value


STANDARD_ORDER = {s: i for i, s in enumerate(Standard)}


@dataclass(frozen=True, order=False)
class SubcategoryId:
    function_code: str
    category_code: str
    index: int

    @classmethod
    def parse(cls, text: str) -> SubcategoryId:
        m = _ID_RE.match(text.strip())
        if not m or int(m.group(3)) < 1:
            raise ValueError(f"malformed subcategory id {text!r}")
        func, cat, idx = m.group(1), m.group(2), int(m.group(3))
        if func not in FUNCTION_CODES:
            raise ValueError(f"unknown function code {func!r} in {text!r}")
        return cls(func, cat, idx)

    @property
    def category_id(self) -> str:
        return f"{self.function_code}.{self.category_code}"

    def sort_key(self) -> tuple[int, str, int]:
        rank = FUNCTION_CODES.index(self.function_code) if self.function_code in FUNCTION_CODES else 99
        return (rank, self.category_code, self.index)

    def __lt__(self, other: SubcategoryId) -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        return f"{self.function_code}.{self.category_code}-{self.index}"


def as_id(value: SubcategoryId | str) -> SubcategoryId:
    return value if isinstance(value, SubcategoryId) else SubcategoryId.parse(value)


@dataclass(frozen=True)
class InformativeReference:
    standard: Standard
    clauses: tuple[str, ...]


@dataclass(frozen=True)
class Subcategory:
    id: SubcategoryId
    description: str
    references: tuple[InformativeReference, ...] = ()

    def clauses(self, standard: Standard) -> tuple[str, ...]:
        """Clause list for ``standard``; empty when the row has no pointer."""
        for ref in self.references:
            if ref.standard == standard:
                return ref.clauses
        return ()


@dataclass(frozen=True)
class Category:
    code: str
    name: str
    description: str
    subcategories: tuple[Subcategory, ...] = ()


@dataclass(frozen=True)
class Function:
    code: str
    name: str
    categories: tuple[Category, ...] = ()


@dataclass(frozen=True)
class FrameworkCore:
    functions: tuple[Function, ...] = ()
    provenance: tuple[str, ...] = field(default=(), compare=False)

    def subcategories(self) -> Iterator[Subcategory]:
        for func in self.functions:
            for cat in func.categories:
                yield from cat.subcategories

    def ids(self) -> list[SubcategoryId]:
        return [s.id for s in self.subcategories()]

    @cached_property
    def _index(self) -> dict[SubcategoryId, Subcategory]:
        index: dict[SubcategoryId, Subcategory] = {}
        for sub in self.subcategories():
            index.setdefault(sub.id, sub)
        return index

    def __contains__(self, item: object) -> bool:
        if isinstance(item, str):
            try:
                item = SubcategoryId.parse(item)
            except ValueError:
                return False
        return item in self._index

    def category(self, category_id: str) -> Category:
        func_code, _, cat_code = category_id.partition(".")
        for func in self.functions:
            if func.code == func_code:
                for cat in func.categories:
                    if cat.code == cat_code:
                        return cat
        raise NotFoundError(f"no category {category_id!r}")

    def __len__(self) -> int:
        return len(self._index)


class ParseContext:
    def __init__(self, source_name: str) -> None:
        self.source_name = source_name
        self.line = 0

    @property
    def where(self) -> str:
        return f"{self.source_name}:{self.line}"


def _parse_references(text: str, ctx: ParseContext) -> tuple[InformativeReference, ...]:
    text = text.strip()
    if not text:
        return ()
    merged: dict[Standard, list[str]] = {}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        name, sep, clause_text = part.partition(":")
        if not sep:
            raise FormatError(f"reference {part!r} lacks '<STANDARD>:'", ctx.where)
        try:
            standard = Standard(name.strip())
        except ValueError:
            raise FormatError(f"unknown standard {name.strip()!r}", ctx.where) from None
        clauses = [c.strip() for c in clause_text.split(",") if c.strip()]
        if not clauses:
            raise FormatError(f"empty clause list for {standard.value}", ctx.where)
        bucket = merged.setdefault(standard, [])
        for clause in clauses:
            if clause in bucket:
                raise FormatError(f"duplicate clause {clause!r} for {standard.value}", ctx.where)
            bucket.append(clause)
    return tuple(InformativeReference(s, tuple(c)) for s, c in merged.items())


def parse_core(source: str, source_name: str = "<core>") -> FrameworkCore:
    """Parse core-file text into a :class:`FrameworkCore`.

    Raises :class:`FormatError` with a ``source:line`` location on the first
    malformed record, duplicate id, unknown function or standard, or empty
    description.
    """
    ctx = ParseContext(source_name)
    functions: list[tuple[str, str, list]] = []
    seen: dict[SubcategoryId, int] = {}
    provenance: list[str] = []

    for ctx.line, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if not functions:
                provenance.append(line.lstrip("#").strip())
            continue

        if line.startswith("FUNCTION "):
            parts = line.split(None, 2)
            if len(parts) < 3:
                raise FormatError("FUNCTION header needs a code and a name", ctx.where)
            code, name = parts[1], parts[2].strip()
            if code not in FUNCTION_CODES:
                raise FormatError(f"unknown function code {code!r}", ctx.where)
            if any(f[0] == code for f in functions):
                raise FormatError(f"duplicate function {code!r}", ctx.where)
            functions.append((code, name, []))
            continue

        if line.startswith("CATEGORY "):
            if not functions:
                raise FormatError("CATEGORY before any FUNCTION", ctx.where)
            head, sep, desc = line[len("CATEGORY "):].partition("|")
            parts = head.split(None, 1)
            if len(parts) < 2:
                raise FormatError("CATEGORY header needs a code and a name", ctx.where)
            code, name = parts[0], parts[1].strip()
            if not re.fullmatch(r"[A-Z]{2,3}", code):
                raise FormatError(f"malformed category code {code!r}", ctx.where)
            cats = functions[-1][2]
            if any(c[0] == code for c in cats):
                raise FormatError(f"duplicate category {functions[-1][0]}.{code}", ctx.where)
            cats.append((code, name, desc.strip(), []))
            continue

        fields = [f.strip() for f in line.split("|")]
        if len(fields) not in (2, 3):
            raise FormatError(f"expected '<id> | <description> | <references>', got {raw!r}", ctx.where)
        try:
            sid = SubcategoryId.parse(fields[0])
        except ValueError as exc:
            raise FormatError(str(exc), ctx.where) from None
        if not functions or not functions[-1][2]:
            raise FormatError(f"{sid} appears before any CATEGORY header", ctx.where)
        func_code = functions[-1][0]
        cat_code, _, _, subs = functions[-1][2][-1]
        if (sid.function_code, sid.category_code) != (func_code, cat_code):
            raise FormatError(f"{sid} listed under {func_code}.{cat_code}", ctx.where)
        if sid in seen:
            raise FormatError(
                f"duplicate subcategory id {sid} (first at {source_name}:{seen[sid]}, again at line {ctx.line})",
                ctx.where,
            )
        seen[sid] = ctx.line
        if not fields[1]:
            raise FormatError(f"empty description for {sid}", ctx.where)
        refs = _parse_references(fields[2] if len(fields) == 3 else "", ctx)
        subs.append(Subcategory(sid, fields[1], refs))

    if not functions:
        raise FormatError("no functions", f"{source_name}")
    return FrameworkCore(
        functions=tuple(
            Function(
                code,
                name,
                tuple(Category(c, n, d, tuple(s)) for c, n, d, s in cats),
            )
            for code, name, cats in functions
        ),
        provenance=tuple(provenance),
    )


def format_core(core: FrameworkCore) -> str:
    """Serialize ``core`` back into the core-file format."""
    lines = [f"# {p}" if p else "#" for p in core.provenance]
    for func in core.functions:
        lines += ["", f"FUNCTION {func.code} {func.name}"]
        for cat in func.categories:
            lines += ["", f"CATEGORY {cat.code} {cat.name} | {cat.description}"]
            for sub in cat.subcategories:
                refs = "; ".join(f"{r.standard.value}: {', '.join(r.clauses)}" for r in sub.references)
                lines.append(f"{sub.id} | {sub.description} | {refs}" if refs else f"{sub.id} | {sub.description}")
    return "\n".join(lines) + "\n"


def load_core(path: str | Path) -> FrameworkCore:
    path = Path(path)
    return parse_core(path.read_text(encoding="utf-8"), source_name=str(path))


def shipped_core() -> FrameworkCore:
    """The bundled CSF v1.0 Framework Core."""
    text = resources.files("ccoq.data").joinpath("csf_v1.0_core.txt").read_text(encoding="utf-8")
    return parse_core(text, source_name="csf_v1.0_core.txt")


# Validation ------------------------------------------------------------------

PROFILES = ("generic", "csf-v1.0")

CSF_V1_COUNTS = {"functions": 5, "subcategories": 98, "ID.AM": 6}


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = ()

    @property
    def ok(self) -> bool:
        return not any(f.severity == "error" for f in self.findings)

    def __len__(self) -> int:
        return len(self.findings)


def validate_core(core: FrameworkCore, profile: str = "generic") -> ValidationReport:
    """Check every FrameworkCore invariant; ``csf-v1.0`` also checks 5/98/6."""
    if profile not in PROFILES:
        raise ValueError(f"unknown validation profile {profile!r}; choose from {PROFILES}")
    findings: list[Finding] = []

    def add(code: str, message: str) -> None:
        findings.append(Finding(code, message))

    seen: set[SubcategoryId] = set()
    for func in core.functions:
        if func.code not in FUNCTION_CODES:
            add("UNKNOWN_FUNCTION", f"unknown function code {func.code!r}")
        for cat in func.categories:
            for sub in cat.subcategories:
                sid = sub.id
                if sid in seen:
                    add("DUPLICATE_ID", f"duplicate subcategory id {sid}")
                seen.add(sid)
                if (sid.function_code, sid.category_code) != (func.code, cat.code):
                    add("MISPLACED_ID", f"{sid} is filed under {func.code}.{cat.code}")
                if sid.index < 1:
                    add("MALFORMED_ID", f"{sid} has index < 1")
                if not sub.description.strip():
                    add("EMPTY_DESCRIPTION", f"{sid} has an empty description")
                standards = [r.standard for r in sub.references]
                if len(standards) != len(set(standards)):
                    add("DUPLICATE_STANDARD", f"{sid} lists a standard more than once")
                for ref in sub.references:
                    if not ref.clauses:
                        add("EMPTY_REFERENCE", f"{sid} has an empty {ref.standard.value} clause list")
                    elif len(ref.clauses) != len(set(ref.clauses)):
                        add("DUPLICATE_CLAUSE", f"{sid} repeats a {ref.standard.value} clause")

    if profile == "csf-v1.0":
        n_func = len(core.functions)
        if n_func != CSF_V1_COUNTS["functions"]:
            add("COUNT", f"expected {CSF_V1_COUNTS['functions']} functions, found {n_func}")
        n_sub = sum(1 for _ in core.subcategories())
        if n_sub != CSF_V1_COUNTS["subcategories"]:
            add("COUNT", f"expected {CSF_V1_COUNTS['subcategories']} subcategories, found {n_sub}")
        try:
            n_am = len(core.category("ID.AM").subcategories)
        except NotFoundError:
            n_am = 0
        if n_am != CSF_V1_COUNTS["ID.AM"]:
            add("COUNT", f"expected {CSF_V1_COUNTS['ID.AM']} subcategories in ID.AM, found {n_am}")
    return ValidationReport(tuple(findings))


def lookup(core: FrameworkCore, id: SubcategoryId | str) -> Subcategory:
    """Return the subcategory with ``id``; suggests same-category ids otherwise."""
    try:
        sid = as_id(id)
    except ValueError as exc:
        raise NotFoundError(str(exc)) from None
    sub = core._index.get(sid)
    if sub is None:
        near = tuple(
            str(s.id)
            for s in core.subcategories()
            if (s.id.function_code, s.id.category_code) == (sid.function_code, sid.category_code)
        )
        raise NotFoundError(f"no subcategory {sid}", near)
    return sub
