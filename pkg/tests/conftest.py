import pytest

from yulebst.rng import RandomStream


@pytest.fixture
def rng():
    return RandomStream(20240601, 0)
