"""Shared fixtures and the acceptance-criterion summary printed after the run."""
import numpy as np
import pytest

from snstf.decoy import SecurityBudget
from snstf.simulator import second_test_config

CRITERIA = {}


def record(criterion: str, passed: bool, detail: str = "") -> None:
    """Remember one acceptance check; several checks may share a criterion."""
    ok, details = CRITERIA.get(criterion, (True, []))
    details.append(("PASS" if passed else "FAIL") + (f" {detail}" if detail else ""))
    CRITERIA[criterion] = (ok and passed, details)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(CRITERIA, key=lambda s: (int(s.split()[0].rstrip("ab")), s)):
        ok, details = CRITERIA[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {name}")
        for d in details:
            terminalreporter.write_line(f"        {d}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def second_test():
    return second_test_config()


@pytest.fixture
def budget():
    return SecurityBudget()
