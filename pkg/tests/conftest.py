import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pauli_current.grid import Lattice

settings.register_profile("default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_lattice():
    return Lattice((8, 9, 10), (0.5, 0.45, 0.4))


@pytest.fixture
def cube16():
    return Lattice.cubic(16, 16.0)


def random_array(rng, shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)
