from __future__ import annotations

from importlib import resources
from pathlib import Path

import pytest

from ccoq.framework_core import SubcategoryId, shipped_core
from ccoq.ledger import Audience, CostKind, CostRecord, Money, Period, Scope
from ccoq.mapping import shipped_mapping

DATA = Path(str(resources.files("ccoq.data")))


@pytest.fixture(scope="session")
def core():
    return shipped_core()


@pytest.fixture(scope="session")
def mapping(core):
    return shipped_mapping(core)


@pytest.fixture(scope="session")
def sample_ledger_path() -> Path:
    return DATA / "sample_ledger.csv"


def make_record(
    sid: str | None,
    amount: int,
    *,
    period: str = "2024-03",
    scope: Scope = Scope.CYBERSECURITY,
    facet: str | None = None,
    audience: Audience | None = None,
    currency: str = "USD",
) -> CostRecord:
    return CostRecord(
        period=Period.parse(period),
        subcategory_id=SubcategoryId.parse(sid) if sid else None,
        amount=Money(amount, currency),
        cost_kind=CostKind.LABOR,
        scope=scope,
        facet=facet,
        audience=audience,
    )


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def record(number: int, name: str, ok: bool, detail: str = "") -> None:
        line = f"criterion {number} ({name}): {'PASS' if ok else 'FAIL'}" + (f" - {detail}" if detail else "")
        print(line)
        lines.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
