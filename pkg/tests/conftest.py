import os

import numpy as np
import pytest

# Keep test runs deterministic and bounded on small CI boxes.
os.environ.setdefault("N2I_THREADS", "1")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
