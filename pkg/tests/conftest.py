import numpy as np
import pytest

from fracobstacle.fespace import FeSpace
from fracobstacle.mesh import build_base_mesh


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


@pytest.fixture
def interval_space():
    """Level-3 interval space (15 interior DoFs)."""
    return FeSpace(build_base_mesh("interval", 3))


@pytest.fixture
def square_space():
    return FeSpace(build_base_mesh("square", 2))
