import numpy as np
import pytest

from shuffletest import SbmSpec, StreamKey


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


def random_sbm_spec(rng, max_blocks=4, max_block_size=10, min_block_size=2):
    """Random small SBM spec for brute-force cross-checks."""
    k = int(rng.integers(2, max_blocks + 1))
    lam = rng.uniform(0.05, 0.95, size=(k, k))
    lam = (lam + lam.T) / 2
    sizes = tuple(int(rng.integers(min_block_size, max_block_size + 1)) for _ in range(k))
    nu = float(rng.uniform(0.5, 1.0))
    return SbmSpec(lam, sizes, nu)


@pytest.fixture
def stream():
    return StreamKey(987654321)
