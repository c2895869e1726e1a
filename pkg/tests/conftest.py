import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from beclab.core import Grid, PairPotential, TrapPotential
from beclab.flow import FlowParams

settings.register_profile("lab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture
def harmonic():
    return TrapPotential.harmonic()


@pytest.fixture
def flow():
    return FlowParams()


@pytest.fixture
def line():
    return Grid(1, 8.0, 257)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def bump(coupling=1.0, radius=1.0, dim=1):
    return PairPotential.with_coupling("bump", coupling, radius, dim)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
