import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make tests/oracles.py importable

from pseudocert import LearnerConfig, simplex_mixture

_ACCEPTANCE_RESULTS = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py::test_criterion_" in report.nodeid:
        _ACCEPTANCE_RESULTS.append((report.nodeid.split("::")[-1], report.passed))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_RESULTS:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, ok in sorted(_ACCEPTANCE_RESULTS):
            terminalreporter.write_line(f"{name}: {'PASS' if ok else 'FAIL'}")


@pytest.fixture(scope="session")
def dist4():
    """Well-separated 4-class mixture: Bayes risk ~ 1e-6, negligible at 3-sigma scales."""
    return simplex_mixture(4, 4, separation=10.0, spread=1.0)


@pytest.fixture
def oracle_learner():
    return LearnerConfig(kind="oracle", oracle_epsilon=0.01, seed=7)
