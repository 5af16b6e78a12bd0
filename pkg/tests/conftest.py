import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mrfkit.core import ControlSystem
from mrfkit.grid import Grid, GridField
from mrfkit.systems import make_system

settings.register_profile(
    "mrfkit", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("mrfkit")


def decay_system(rate=1.0, target=None):
    """``x' = -rate * x`` in one dimension; distance to the origin by default."""
    dist = target or (lambda x: np.abs(np.asarray(x)[..., 0]))
    return ControlSystem(
        name="decay",
        state_dim=1,
        control_samples=[0.0],
        dynamics=lambda x, u: -rate * np.asarray(x),
        running_cost=lambda x, u: np.ones(np.shape(x)[:-1]),
        target_distance=dist,
        box=[(-10.0, 10.0)],
        target_box=[(0.0, 0.0)],
    )


@pytest.fixture(scope="session")
def int1d():
    return make_system("int1d_mintime")


@pytest.fixture(scope="session")
def grid1d(int1d):
    return Grid.from_spacing(int1d.box, 0.01)


@pytest.fixture(scope="session")
def w2d(int1d, grid1d):
    """``W = 2 d`` on the unit-speed interval."""
    return GridField.from_function(grid1d, lambda x: 2.0 * int1d.distance(x), int1d.distance)


@pytest.fixture(scope="session")
def w1d(int1d, grid1d):
    return GridField.from_function(grid1d, int1d.distance, int1d.distance)


# acceptance criterion -> (verdict, detail); printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        verdict, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:2d}: {verdict}  {detail}")
