import numpy as np
import pytest

from weylab.profiles import CutoffProfileSquared


@pytest.fixture(scope="session")
def profile():
    return CutoffProfileSquared()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
