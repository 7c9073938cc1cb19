import numpy as np
import pytest

from pointvortex.checks import TEST_MAP
from pointvortex.geometry import ConformalDisk, HalfPlane, Plane, UnitDisk


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def test_map():
    return ConformalDisk(coefficients=TEST_MAP)


@pytest.fixture(scope="session")
def identity_map():
    return ConformalDisk(coefficients=(0.0, 1.0))


@pytest.fixture(params=["plane", "half-plane", "unit-disk"])
def closed_form_domain(request):
    return {"plane": Plane(), "half-plane": HalfPlane(), "unit-disk": UnitDisk()}[request.param]


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
