import numpy as np
import pytest

from utils.config import get_default_config


@pytest.fixture
def settings():
    config = get_default_config()
    config["runner"]["threads"] = 2
    return config


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
