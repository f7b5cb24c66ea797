import numpy as np
import pytest

from advmems.fieldexpr import sample_vector
from advmems.grid import build_grid
from advmems.hodge import decompose
from advmems.solver import continue_branch
from advmems.spectral import attach_stability

# criterion lines collected by test_acceptance and echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def interval513():
    return build_grid("interval", m=513)


@pytest.fixture(scope="session")
def branch_interval(interval513):
    b = continue_branch(interval513)
    attach_stability(b)
    return b


@pytest.fixture(scope="session")
def rect65():
    return build_grid("rectangle", m=65)


@pytest.fixture(scope="session")
def shear(rect65):
    return sample_vector(rect65, ["sin(pi*y)", "0"]).values


@pytest.fixture(scope="session")
def shear_decomposition(rect65, shear):
    return decompose(rect65, shear)


@pytest.fixture(scope="session")
def branch_shear(rect65, shear):
    b = continue_branch(rect65, shear)
    attach_stability(b)
    return b


@pytest.fixture(scope="session")
def branch_ball3():
    b = continue_branch(build_grid("radial", N=3, m=1025))
    attach_stability(b)
    return b


@pytest.fixture(scope="session")
def branch_ball8():
    b = continue_branch(build_grid("radial", N=8, m=2049))
    attach_stability(b)
    return b


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
