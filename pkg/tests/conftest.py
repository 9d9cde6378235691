import numpy as np
import pytest

from peakon_lab.gridfn import InitialDatumSpec, make_grid

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid():
    return make_grid()


@pytest.fixture(scope="session")
def fine_grid():
    return make_grid(25.0, 8000, 1.003**0.25)


@pytest.fixture(scope="session")
def generic_spec():
    return InitialDatumSpec("peaked_exponential", amplitude=0.3, beta=1.5, slope_right=-0.4, slope_left=0.7)


@pytest.fixture(scope="session")
def generic_datum(grid, generic_spec):
    return generic_spec.sample(grid)


def rel(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / max(1e-300, float(np.max(np.abs(b)))))
