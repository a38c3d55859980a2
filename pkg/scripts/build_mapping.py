"""Regenerate src/ccoq/data/csf_coq_mapping.txt.

Annotated rows are written as given below. Every other subcategory gets the
function-level default from ``ccoq.mapping.provisional_entry``.
"""

from __future__ import annotations

from pathlib import Path

from ccoq.framework_core import SubcategoryId, shipped_core
from ccoq.mapping import (
    A, EF, IF, P, Facet, Mapping, MappingEntry, Provenance, format_mapping, provisional_entry,
)

OUT = Path(__file__).resolve().parents[1] / "src" / "ccoq" / "data" / "csf_coq_mapping.txt"

HEADER = """\
# CSF v1.0 subcategory -> quality cost category mapping.
#
# PaperAnnotated rows follow the published annotations: split subcategories
# (PR.IP-4, PR.PT-1), the Respond rows that need internal/external detail,
# and RS.MI-3. Provisional rows are function-level defaults (ID/PR
# Prevention unless an appraisal keyword fires; DE Appraisal with the
# detect caution; RS/RC both failure categories, audience required) and
# should not be promoted without the full published table.
#
# The annotation list names "RS.AM-4", which is not a v1.0 id. It is taken
# here to mean RS.AN-4 (Incidents are categorized consistent with response
# plans).
"""

RESPOND_AUDIENCE = ["RS.RP-1", "RS.CO-2", "RS.CO-3", "RS.CO-4", "RS.CO-5", "RS.AN-3", "RS.AN-4", "RS.MI-1", "RS.MI-2"]


def annotated() -> dict[SubcategoryId, MappingEntry]:
    pa = Provenance.PAPER_ANNOTATED
    rows = [
        MappingEntry(
            SubcategoryId.parse("PR.IP-4"), (P, A),
            (Facet("conduct", P), Facet("test", A)),
            note="charge conducting backups and testing backups separately", provenance=pa,
        ),
        MappingEntry(
            SubcategoryId.parse("PR.PT-1"), (P, A),
            (Facet("develop", P), Facet("review", A)),
            note="charge log process development and log review/audit separately", provenance=pa,
        ),
        MappingEntry(
            SubcategoryId.parse("RS.MI-3"), (P, A, IF, EF),
            (Facet("prevent", P), Facet("identify", A), Facet("internal", IF), Facet("external", EF)),
            audience_required=True,
            note="spans prevention, identification, and internal or external failure response", provenance=pa,
        ),
    ]
    for sid in RESPOND_AUDIENCE:
        note = "published as RS.AM-4" if sid == "RS.AN-4" else None
        rows.append(MappingEntry(SubcategoryId.parse(sid), (IF, EF), audience_required=True, note=note, provenance=pa))
    return {r.subcategory_id: r for r in rows}


def main() -> None:
    core = shipped_core()
    fixed = annotated()
    entries = tuple(fixed.get(sub.id) or provisional_entry(sub) for sub in core.subcategories())
    mapping = Mapping(entries, name="CSF v1.0 to cybersecurity cost of quality", version="1")
    OUT.write_text(HEADER + format_mapping(mapping), encoding="utf-8")
    print(f"wrote {len(entries)} entries to {OUT}")


if __name__ == "__main__":
    main()
