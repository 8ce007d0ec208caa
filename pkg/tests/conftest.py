import os

import pytest

_OUTCOMES: dict = {}


@pytest.fixture(scope="session")
def suite():
    from lcgeom import acceptance

    seed = int(os.environ.get("LCGEOM_ACCEPT_SEED", "0"))
    return acceptance.run_suite(seed, 1), acceptance.run_suite(seed, 8)


def pytest_runtest_logreport(report):
    if "test_acceptance.py::" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::", 1)[1]
        _OUTCOMES[name] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _OUTCOMES.items():
        terminalreporter.write_line(f"{outcome}  {name}")
