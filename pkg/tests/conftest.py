import numpy as np
import pytest

from neumannsys.discretization import DiscreteSystem
from neumannsys.domain import NormBundle, build_coefficients, build_uniform_grid
from neumannsys.nonlinearity import catalog_log
from neumannsys.thresholds import compute_thresholds


@pytest.fixture(scope="session")
def grid2d():
    return build_uniform_grid(2, (1.0, 1.0), (17, 17))


@pytest.fixture(scope="session")
def grid1d():
    return build_uniform_grid(1, (1.0,), (33,))


@pytest.fixture(scope="session")
def log_nl():
    return catalog_log()


@pytest.fixture(scope="session")
def unit_thresholds(log_nl):
    return compute_thresholds(log_nl, NormBundle.unit())


@pytest.fixture(scope="session")
def unit_system(grid2d, log_nl):
    return DiscreteSystem(grid2d, build_coefficients(grid2d), log_nl, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
