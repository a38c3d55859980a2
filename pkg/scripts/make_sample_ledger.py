"""Regenerate src/ccoq/data/sample_ledger.csv (1,000 clean, seeded rows)."""

from __future__ import annotations

import csv
import random
from pathlib import Path

from ccoq.framework_core import shipped_core
from ccoq.ledger import REQUIRED_COLUMNS
from ccoq.mapping import shipped_mapping

OUT = Path(__file__).resolve().parents[1] / "src" / "ccoq" / "data" / "sample_ledger.csv"
SEED = 20240101
ROWS = 1000


def main() -> None:
    rng = random.Random(SEED)
    core = shipped_core()
    mapping = shipped_mapping(core)
    entries = list(mapping.entries)
    periods = [f"2024-{m:02d}" for m in range(1, 13)]
    with OUT.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REQUIRED_COLUMNS + ("currency", "memo"))
        for i in range(ROWS):
            period = rng.choice(periods)
            kind = rng.choices(["Labor", "Materials", "Contract"], weights=[6, 2, 2])[0]
            scope = rng.choices(["Cybersecurity", "OrdinaryQuality", "Development"], weights=[6, 2, 2])[0]
            amount = rng.randint(1_000, 2_500_000)
            if scope == "Development":
                w.writerow([period, "", "", "", amount, kind, scope, "USD", f"dev work item {i}"])
                continue
            entry = rng.choice(entries)
            facet = audience = ""
            if entry.facets:
                facet = rng.choice(entry.facets).facet_id
            elif entry.audience_required:
                audience = rng.choice(["Internal", "External"])
            w.writerow([period, entry.subcategory_id, facet, audience, amount, kind, scope, "USD", f"item {i}"])
    print(f"wrote {ROWS} rows to {OUT}")


if __name__ == "__main__":
    main()
