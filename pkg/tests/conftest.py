import numpy as np
import pytest

from cellab.config import DEFAULT_TOLERANCES


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def tol():
    return DEFAULT_TOLERANCES
