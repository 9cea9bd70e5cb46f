import numpy as np
import pytest
from hypothesis import strategies as st

from kdlab.distributions import softmax


@st.composite
def logits(draw, min_size=2, max_size=64, scale=3.0):
    V = draw(st.integers(min_size, max_size))
    seed = draw(st.integers(0, 2**32 - 1))
    return np.random.default_rng(seed).normal(0.0, scale, V)


@st.composite
def problem(draw, min_size=2, max_size=64, scale=3.0):
    """(teacher p, student logits z, target m) with matching sizes."""
    V = draw(st.integers(min_size, max_size))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    p = softmax(rng.normal(0.0, scale, V))
    z = rng.normal(0.0, scale, V)
    return p, z, int(rng.integers(V))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


P3 = np.array([0.7, 0.2, 0.1])
Q3 = np.array([0.5, 0.3, 0.2])
