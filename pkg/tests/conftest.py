"""
Shared pytest setup: import paths, the slow marker and small fixtures.
"""

import os
import sys
import logging

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, 'src'))
sys.path.insert(0, ROOT)

import gal_config_manager  # noqa: E402
from gal_data import Dataset  # noqa: E402
from gal_synth import SynthConfig, generate  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: qualitative reproductions on larger synthetic datasets')


@pytest.fixture(autouse=True)
def fresh_config():
    """Every test starts from the repository parameter file."""
    gal_config_manager._config_manager = None
    yield
    gal_config_manager._config_manager = None


@pytest.fixture
def gal_log(caplog):
    """caplog attached to the package logger alone, so each record is captured once."""
    package_logger = logging.getLogger('galloping_prediction')
    previous_level, previous_propagate = package_logger.level, package_logger.propagate
    package_logger.addHandler(caplog.handler)
    package_logger.setLevel(logging.DEBUG)
    package_logger.propagate = False
    yield caplog
    package_logger.removeHandler(caplog.handler)
    package_logger.setLevel(previous_level)
    package_logger.propagate = previous_propagate


@pytest.fixture
def toy_dataset():
    """Four 1-D points, two per class, separable at 0."""
    return Dataset.from_arrays(np.array([[-2.0], [-1.0], [1.0], [2.0]]), np.array([-1, -1, 1, 1]),
                               columns=('wind_speed',))


@pytest.fixture(scope='session')
def small_synthetic():
    return generate(SynthConfig(n_total=1200, seed=11))


@pytest.fixture(scope='session')
def default_synthetic():
    return generate(SynthConfig(seed=2024))
