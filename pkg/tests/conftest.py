import numpy as np
import pytest

from quadexp import build_ccr_kernel, make_grid, random_model


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def model2(rng):
    return random_model(rng, n=2, m=2)


@pytest.fixture
def model4():
    return random_model(np.random.default_rng(11), n=4, m=4)


@pytest.fixture
def pi2():
    return 0.2 * np.array([[1.0, 0.3], [0.3, 0.8]])


@pytest.fixture
def grid16():
    return make_grid(1.0, 16)


@pytest.fixture
def ccr16(model2, grid16):
    return build_ccr_kernel(model2, grid16)
