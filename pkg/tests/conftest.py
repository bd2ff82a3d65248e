"""Shared fixtures and the acceptance summary printer."""

from __future__ import annotations

import pytest

#: criterion id -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def record_criterion():
    def _record(cid: str, passed: bool, detail: str):
        ACCEPTANCE[cid] = (bool(passed), detail)
        print(f"[{cid}] {'PASS' if passed else 'FAIL'}: {detail}")
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: (len(c), c)):
        passed, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{cid}: {'PASS' if passed else 'FAIL'} | {detail}")
