import numpy as np
import pytest

from stretchlab import fuchsian


@pytest.fixture(scope="session")
def octagon():
    return fuchsian.octagon_representation()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
