import numpy as np
import pytest

from zetar import reference_scenario


@pytest.fixture(scope="session")
def averse():
    return reference_scenario("averse")


@pytest.fixture(scope="session")
def seeking():
    return reference_scenario("seeking")


@pytest.fixture(scope="session")
def neutral():
    return reference_scenario("neutral")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
