from pathlib import Path

import pytest

from inspect_fdi.config import load_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

_criteria: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, text = mark.args
    passed, prev = rep.passed, _criteria.get(n, (text, True))[1]
    if rep.when == "call" or not rep.passed:
        _criteria[n] = (text, prev and passed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        text, ok = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {text}")


@pytest.fixture(scope="session")
def scenario():
    return lambda name: load_scenario(SCENARIOS / f"{name}.yaml")
