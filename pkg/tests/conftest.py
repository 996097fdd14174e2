import numpy as np
import pytest

from rrfsi.mesh import build_layered_rect_mesh


@pytest.fixture(scope="session")
def mesh2():
    return build_layered_rect_mesh((0, 1, 0, 1), (0, 1, -1, 0), 2, 2)


@pytest.fixture(scope="session")
def mesh4():
    return build_layered_rect_mesh((0, 1, 0, 1), (0, 1, -1, 0), 4, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[k])
