import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_CRITERIA: dict = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance verdict: ``criterion(number, passed, detail)``."""

    def record(number, passed, detail):
        _CRITERIA[request.node.nodeid] = (number, bool(passed), detail)
        return passed

    return record


def pytest_runtest_logreport(report):
    if report.when == "call" and report.nodeid in _CRITERIA and report.failed:
        number, _, detail = _CRITERIA[report.nodeid]
        _CRITERIA[report.nodeid] = (number, False, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_CRITERIA.values(), key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
