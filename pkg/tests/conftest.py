import numpy as np
import pytest
from hypothesis import settings

from finls.ground_state import solve_ground_state
from finls.model import ModelParams, WeightField
from finls.spectral import Field, Grid

settings.register_profile("finls", deadline=None, derandomize=True, max_examples=50)
settings.load_profile("finls")


@pytest.fixture(scope="session")
def params():
    return ModelParams(2, 0.8, 0.4, 3.0, "focusing")


@pytest.fixture(scope="session")
def grid64():
    return Grid(2, 64, 8.0)


@pytest.fixture(scope="session")
def grid128():
    return Grid(2, 128, 16.0)


@pytest.fixture(scope="session")
def ground128(params, grid128):
    return solve_ground_state(params, grid128)


@pytest.fixture(scope="session")
def ground256(params):
    return solve_ground_state(params, Grid(2, 256, 16.0))


def gaussian(grid, width=1.0, center=None, kick=None, amp=1.0):
    center = center if center is not None else [0.0] * grid.dim
    kick = kick if kick is not None else [0.0] * grid.dim
    r2 = sum((x - c) ** 2 for x, c in zip(grid.coords, center))
    phase = sum(k * x for k, x in zip(kick, grid.coords))
    return Field(grid, amp * np.exp(-r2 / (2 * width**2) + 1j * phase))


@pytest.fixture
def weight64(grid64, params):
    return WeightField.build(grid64, params.b)


ACCEPTANCE_LINES = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria (slow)")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
