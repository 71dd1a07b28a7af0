import numpy as np
import pytest

from bose2d import eos


@pytest.fixture(scope="session")
def reference_rows():
    return eos.load_reference_rows()


@pytest.fixture()
def rng():
    return np.random.default_rng(20260808)
