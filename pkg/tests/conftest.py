import numpy as np
import pytest

from isoscurv.fields import build_catalog_spec


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240611))


@pytest.fixture(scope="session")
def ex11():
    return build_catalog_spec("EXAMPLE_1_1")


@pytest.fixture(scope="session")
def ex51():
    return build_catalog_spec("EXAMPLE_5_1")


@pytest.fixture(scope="session")
def flat():
    return build_catalog_spec("FLAT_PARALLEL")
