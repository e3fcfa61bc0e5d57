from __future__ import annotations

import pytest

from helpers import FIXTURES

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def fixtures():
    return FIXTURES


@pytest.fixture
def record_criterion():
    """Record one acceptance line; the summary is printed at the end of the run."""

    def record(name: str, ok: bool, detail: str = "") -> None:
        ACCEPTANCE_RESULTS.append((name, ok, detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
