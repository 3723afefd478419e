"""Shared fixtures and the acceptance-criteria summary hook."""

import numpy as np
import pytest

# criterion results recorded by tests/test_acceptance.py; printed as one
# PASS/FAIL line each at the end of the pytest run
_CRITERIA = []


def record_criterion(name: str, passed: bool, detail: str):
    _CRITERIA.append((name, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _CRITERIA:
        terminalreporter.write_line(
            f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(0)
