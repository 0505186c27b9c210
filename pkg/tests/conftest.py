import numpy as np
import pytest

from zeromodes.dirac import build_family
from zeromodes.sphere import SphereScalar, hodge_gauge


def tilted(c=1.0):
    return SphereScalar.constant(0.5, 1) + SphereScalar.coordinate(3, c)


@pytest.fixture(scope="session")
def tilted_pot():
    return hodge_gauge(tilted(), 1)


@pytest.fixture(scope="session")
def const_pot():
    return hodge_gauge(SphereScalar.constant(0.5), 1)


_FAMILIES = {}


def family(k, pot, n_max=24, margin=2):
    key = (k, id(pot), n_max, margin)
    if key not in _FAMILIES:
        _FAMILIES[key] = build_family(k, pot, n_max, margin)
    return _FAMILIES[key]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
