import numpy as np
import pytest

from dualvol import bodies

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def body42():
    return bodies.random_body(bodies.GeneratorSpec(3, 20), 42)


@pytest.fixture(scope="session")
def pair3():
    spec = bodies.GeneratorSpec(3, 12)
    return bodies.random_body(spec, 7), bodies.random_body(spec, 8)
