import numpy as np
import pytest

from treecast import _kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    _kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
