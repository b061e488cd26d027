import sys

import numpy as np
import pytest

from pabeam.core import AcquisitionParams, ArrayGeometry, ChannelDataSet, ImagingGrid
from pabeam.synth import Absorber, Phantom, simulate_channels


@pytest.fixture(scope="session")
def small_geometry():
    return ArrayGeometry(16, 0.3e-3)


@pytest.fixture(scope="session")
def acq():
    return AcquisitionParams()


@pytest.fixture(scope="session")
def single_absorber_channels(small_geometry, acq):
    """Noise-free data for one absorber at (0, 12 mm) on a 16-element array."""
    return simulate_channels(Phantom((Absorber((0.0, 12e-3)),)), small_geometry, acq)


@pytest.fixture(scope="session")
def small_grid():
    return ImagingGrid(lateral_extent=4e-3, axial_range=(10e-3, 14e-3), spacing=0.2e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def zero_channels(geometry, acq):
    return ChannelDataSet(np.zeros((geometry.num_elements, acq.num_samples)), acq, geometry)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])
