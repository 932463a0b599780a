"""
Pytest configuration and fixtures for geimlab tests.

Grids, snapshot sets and models are immutable, so the expensive ones are
shared across the whole session.
"""

import tempfile
from pathlib import Path

import pytest

from geimlab.fieldcore import Product, make_grid
from geimlab.geim import geim_build
from geimlab.pde import generate_snapshots
from geimlab.sensors import (
    build_dirac_dictionary,
    build_moment_dictionary,
    default_moment_centers,
)

SMALL_BOUNDS = (0.0, 2.0, 0.0, 1.0)
TRAINING_RANGES = ((-1.0, 1.0), (-1.0, 1.0), (0.5, 1.5))


@pytest.fixture
def temp_dir():
    """Create a temporary directory for testing."""
    with tempfile.TemporaryDirectory() as temp_dir:
        yield Path(temp_dir)


@pytest.fixture(scope="session")
def grid():
    """33 x 17 grid on [0, 2] x [0, 1] with the interface on column 12."""
    return make_grid(33, 17, SMALL_BOUNDS, 0.75)


@pytest.fixture(scope="session")
def tiny_grid():
    """5 x 4 grid for property tests."""
    return make_grid(5, 4, (0.0, 1.0, 0.0, 1.0), 0.5)


@pytest.fixture(scope="session")
def snapshots(grid):
    """27 training solutions, three values per parameter."""
    return generate_snapshots(grid, TRAINING_RANGES, (3, 3, 3))


@pytest.fixture(scope="session")
def heldout(grid):
    """Solutions at parameters strictly between the training values."""
    return generate_snapshots(grid, ((-0.5, 0.5), (-0.5, 0.5), (0.75, 1.25)), (2, 2, 2))


@pytest.fixture(scope="session")
def norm_mask(grid):
    return grid.mask("omega2_closure")


@pytest.fixture(scope="session")
def moment_dictionary(grid):
    """Bump sensors on omega2, radius three grid steps."""
    mask = grid.mask("omega2")
    centers = default_moment_centers(grid, mask, target=60)
    return build_moment_dictionary(grid, mask, centers, 3.0 * grid.hx)


@pytest.fixture(scope="session")
def dirac_dictionary(grid):
    return build_dirac_dictionary(grid, grid.mask("omega"))


@pytest.fixture(scope="session")
def l2_model(snapshots, moment_dictionary, norm_mask):
    return geim_build(
        snapshots.fields, moment_dictionary, norm_mask, Product.L2, M_max=15
    )


@pytest.fixture(scope="session")
def h1_model(snapshots, moment_dictionary, norm_mask):
    return geim_build(
        snapshots.fields, moment_dictionary, norm_mask, Product.H1, M_max=15
    )


@pytest.fixture
def tiny_config_text():
    """Configuration small enough for end-to-end CLI runs."""
    return """
nx = 17
ny = 9
alpha_count = 2
beta_count = 2
gamma_count = 2
M_max = 6
series = 2
noise_M = 2
trials = 200
"""


@pytest.fixture
def tiny_config_file(temp_dir, tiny_config_text):
    config_file = temp_dir / "experiment.toml"
    config_file.write_text(tiny_config_text)
    return config_file
