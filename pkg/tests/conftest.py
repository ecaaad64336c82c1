import numpy as np
import pytest

from curvesurvey import CurvePopulation, TimeGrid

_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): exit criterion, listed in the summary")


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        label = dict(report.user_properties).get("acceptance")
        if label is not None:
            _acceptance[label] = report.outcome


def pytest_runtest_setup(item):
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        item.user_properties.append(("acceptance", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_acceptance, key=lambda s: int(s.split()[0])):
        verdict = "PASS" if _acceptance[label] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {label}")


@pytest.fixture
def toy4():
    """Four curves on two grid points, the hand-worked example population."""
    return CurvePopulation(TimeGrid([0.0, 1.0]), np.array([[1.0, 2], [3, 4], [5, 6], [7, 8]]))


def random_population(rng, N, d, strata=None):
    grid = TimeGrid(np.sort(rng.uniform(0, 10, d)) + np.arange(d))
    values = rng.normal(0, 1, (N, d)) * rng.uniform(0.5, 3, (N, 1)) + rng.normal(5, 2, (N, 1))
    return CurvePopulation(grid, values, strata)
