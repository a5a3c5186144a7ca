import numpy as np
import pytest

from nchv.basisfamily import generate_family
from nchv.pba import PartialBooleanAlgebra

SEED_FAMILY = 1234


@pytest.fixture(scope="session")
def family10():
    return generate_family(3, 10, seed=SEED_FAMILY)


@pytest.fixture(scope="session")
def pba10(family10):
    return PartialBooleanAlgebra.from_family(family10)


@pytest.fixture()
def rng():
    return np.random.default_rng(0xC0FFEE)
