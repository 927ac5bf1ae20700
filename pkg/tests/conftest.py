import math

import numpy as np
import pytest

SQRT2 = math.sqrt(2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
