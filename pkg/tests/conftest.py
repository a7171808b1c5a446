import numpy as np
import pytest

from nematic_blowup.grid import build_grid
from nematic_blowup.profiles import profile_constants


@pytest.fixture(scope="session")
def consts4():
    return profile_constants(4)


@pytest.fixture(scope="session")
def small_grid():
    """Geometric grid used for cheap evolution tests (r_max = 20, 512 nodes)."""
    return build_grid(20.0, 512, "geometric", 1.008)


@pytest.fixture(scope="session")
def focus_grid():
    """Resolves 1/lambda_0 = 1/16 with about 200 nodes."""
    return build_grid(50.0, 1024, "geometric", 1.008)


def rel_l2(grid, a, b):
    from nematic_blowup.grid import inner
    d = np.asarray(a) - np.asarray(b)
    return float(np.sqrt(inner(grid, d, d) / inner(grid, b, b)))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
