import pytest
from hypothesis import HealthCheck, settings

from machzero import CutoffSpec, GasLaw, NozzleMap, build_mesh

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# filled by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def gas2():
    return GasLaw("polytropic", 2.0)


@pytest.fixture(scope="session")
def gas14():
    return GasLaw("polytropic", 1.4)


@pytest.fixture(scope="session")
def spec():
    return CutoffSpec(theta=0.5, eps0=0.2)


@pytest.fixture(scope="session")
def straight():
    return NozzleMap("straight")


@pytest.fixture(scope="session")
def sinus():
    return NozzleMap("sinusoidal_wall", amplitude=0.2, period=4.0)


@pytest.fixture(scope="session")
def straight_mesh(straight):
    return build_mesh(straight, 2.0, 16, 4)


@pytest.fixture(scope="session")
def sinus_mesh(sinus):
    return build_mesh(sinus, 4.0, 64, 16)
