import sys
from pathlib import Path

import numpy as np
import pytest

# Add repository root to path for imports
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from zakotfs.filters import FilterSpec
from zakotfs.lattice import LatticeParams
from zakotfs.ldpc import construct_code

DOPPLER_PERIOD = 30000.0


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo checks that take minutes")


@pytest.fixture
def small_params():
    """M=8, N=12: B=240 kHz, T=0.4 ms"""
    return LatticeParams.from_counts(8, 12, DOPPLER_PERIOD)


@pytest.fixture
def tiny_params():
    return LatticeParams.from_counts(4, 3, DOPPLER_PERIOD)


@pytest.fixture
def full_params():
    return LatticeParams(bandwidth=960000.0, duration=0.0016, doppler_period=DOPPLER_PERIOD)


@pytest.fixture
def sinc():
    return FilterSpec('sinc')


@pytest.fixture
def short_sinc():
    return FilterSpec('sinc', trunc_tau=6, trunc_nu=6)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope='session')
def small_code():
    """n = 12 * 37 = 444, k = 222: 222 symbols fit a 16x16 frame"""
    return construct_code(seed=0, lifting=37)
