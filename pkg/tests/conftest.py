import numpy as np
import pytest

from rumtest.geometry import enumerate_patches


@pytest.fixture
def two_period():
    """T=2, L=2 with p_1=(1,2), p_2=(2,1): two patches per period."""
    return enumerate_patches(np.array([[1.0, 2.0], [2.0, 1.0]]))

