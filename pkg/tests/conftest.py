import numpy as np
import pytest

from ternlut import QuantizedActivations, TernaryMatrix

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    number, title = marker.args
    if report.when == "setup" and report.passed:
        return
    _CRITERIA[number] = (title, report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcome = _CRITERIA[number]
        status = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_ternary(rng, m, k, scale=1.0):
    return TernaryMatrix(rng.integers(-1, 2, size=(m, k)), scale)


def random_acts(rng, n, k, scale=1.0):
    return QuantizedActivations(rng.integers(-127, 128, size=(n, k)), scale)
