import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from bidir_synth.values import ExampleTuple, Grid

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def grids(draw, max_side=6, min_side=1):
    h = draw(st.integers(min_side, max_side))
    w = draw(st.integers(min_side, max_side))
    cells = draw(st.lists(st.integers(0, 9), min_size=h * w, max_size=h * w))
    return Grid(np.array(cells, dtype=np.uint8).reshape(h, w))


@st.composite
def grid_tuples(draw, k=None, max_side=6):
    k = k or draw(st.integers(1, 4))
    return ExampleTuple(tuple(draw(grids(max_side=max_side)) for _ in range(k)))


@st.composite
def int_tuples(draw, k=None, lo=0, hi=100):
    k = k or draw(st.integers(1, 4))
    return ExampleTuple(tuple(draw(st.integers(lo, hi)) for _ in range(k)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
