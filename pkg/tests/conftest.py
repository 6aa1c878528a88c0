import numpy as np
import pytest

from backscatter2d.grid import Grid2D
from backscatter2d.potentials import disk


@pytest.fixture(scope="session")
def grid256():
    return Grid2D(256, 4.0)


@pytest.fixture(scope="session")
def grid128():
    return Grid2D(128, 4.0)


@pytest.fixture(scope="session")
def unit_disk():
    return disk(0.8, 1.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240801)
