import numpy as np
import pytest
from hypothesis import settings

from asit.grid import ComplexField2D, Grid2D, fft2, ifft2
from asit.propagation import PropagationContext, disk_mask

settings.register_profile("asit", deadline=None, max_examples=25)
settings.load_profile("asit")

WAVELENGTH = 650e-9


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def grid64():
    return Grid2D.square(64, 1e-6)


@pytest.fixture(scope="session")
def ctx64(grid64):
    return PropagationContext(WAVELENGTH, grid64)


def random_field(rng, grid):
    values = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return ComplexField2D(grid, values)


def bandlimited_field(rng, grid, f_cut):
    """Random field with spectrum confined to |f| <= f_cut, unit energy."""
    u = random_field(rng, grid).values
    u = ifft2(fft2(u) * disk_mask(grid, f_cut))
    return ComplexField2D(grid, u / np.linalg.norm(u))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
