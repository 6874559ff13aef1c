import numpy as np
import pytest

from seqsr.core import SolverConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_cfg():
    """Moderate weights on which finite differences are well conditioned."""
    return SolverConfig(alpha1=0.5, alpha2=2.0, alpha3=0.5, rho1=2.0, rho2=3.0, rho3=1.5, rho=1.0,
                        p=2, levels=1)


# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.rstrip("abc")), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def report_criterion():
    """``report_criterion(key, passed, detail)`` prints and records a PASS/FAIL line."""

    def record(key: str, passed: bool, detail: str) -> bool:
        line = f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES[key] = line
        return passed

    return record
