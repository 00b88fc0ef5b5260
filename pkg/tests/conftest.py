import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kuznetsov import Domain, PhysicalParams

settings.register_profile("ci", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


@pytest.fixture(scope="session")
def line():
    return Domain.interval(0.0, math.pi, 64)


@pytest.fixture(scope="session")
def square():
    return Domain.rectangle(1.0, 1.0, 24)


@pytest.fixture(scope="session")
def disk():
    return Domain.disk(1.0, 24)


@pytest.fixture
def unit_params():
    return PhysicalParams(c=1.0, b=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line_ in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line_)
