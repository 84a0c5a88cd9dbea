import numpy as np
import pytest

from deconvw1.grids import GridSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def grid_4096():
    """Default pipeline grid: [-20, 20), 4096 points."""
    return GridSpec(-20.0, 40.0 / 4096, 4096).template()


@pytest.fixture
def grid_8192():
    """Wide grid for spectral verifiers: [-40, 40), 8192 points."""
    return GridSpec(-40.0, 80.0 / 8192, 8192).template()
