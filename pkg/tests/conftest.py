import numpy as np
import pytest

from mimosar.geometry import centered_scan, chirp_77ghz, single_transceiver
from mimosar.scene import PointScatterer, Scene, simulate_beat


@pytest.fixture(scope="session")
def chirp64():
    return chirp_77ghz(n_samples=64)


@pytest.fixture(scope="session")
def chirp256():
    return chirp_77ghz(n_samples=256)


@pytest.fixture(scope="session")
def point_cube_32(chirp256):
    """Unit scatterer 540 mm in front of a 32 x 32, 2 mm monostatic raster."""
    scan = centered_scan(32, 32, 2e-3)
    scene = Scene([PointScatterer((0.0, 0.0, 0.54))])
    return simulate_beat(scene, chirp256, scan, single_transceiver())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def peak_index(data):
    mag = np.abs(data)
    return tuple(int(i) for i in np.unravel_index(np.argmax(mag), mag.shape))
