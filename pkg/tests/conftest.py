import numpy as np
import pytest

from cludi.diffusion import build_sqrt_schedule


@pytest.fixture(scope="session")
def default_schedule():
    return build_sqrt_schedule()


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
