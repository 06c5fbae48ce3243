import numpy as np
import pytest

from neurodob.lqr import LqrWeights, solve_dare
from neurodob.vehicle import VehicleParams, discrete_model


@pytest.fixture(scope="session")
def vehicle():
    return VehicleParams()


@pytest.fixture(scope="session")
def model(vehicle):
    return discrete_model(vehicle)


@pytest.fixture(scope="session")
def design(model):
    return solve_dare(model, LqrWeights.diagonal())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(n, ok, detail)``; fails the test when not ok."""

    def record(number, ok, detail):
        _CRITERIA[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number:2d}: {detail}")
