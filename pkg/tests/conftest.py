import numpy as np
import pytest

from friedrichs_spectral.functionals import DEFAULT_PROBES, make_state_preset, observable_presets
from friedrichs_spectral.grid import build_grid
from friedrichs_spectral.model import ScatteringModel
from friedrichs_spectral.oracle import DiscretizedSystem

ACCEPTANCE_RESULTS = {}


def record(criterion: int, passed: bool, detail: str):
    ACCEPTANCE_RESULTS[criterion] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def grid():
    return build_grid(200, 20.0)


@pytest.fixture(scope="session")
def model(grid):
    m = ScatteringModel(grid, 0.25)
    m.find_pole()
    return m


@pytest.fixture(scope="session")
def free_model(grid):
    return ScatteringModel(grid, 0.0)


@pytest.fixture(scope="session")
def packet(grid):
    return make_state_preset("lorentzian_packet").normalized(grid)


@pytest.fixture(scope="session")
def rho0(grid, packet):
    return packet.state(grid)


@pytest.fixture(scope="session")
def analytic_obs(model):
    return observable_presets(model)


@pytest.fixture(scope="session")
def obs(grid, analytic_obs):
    return {k: v.kernel(grid) for k, v in analytic_obs.items()}


@pytest.fixture(scope="session")
def probes(obs):
    return {k: obs[k] for k in DEFAULT_PROBES}


@pytest.fixture(scope="session")
def system(model):
    return DiscretizedSystem(model)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
