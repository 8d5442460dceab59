import pytest

from fraclab.spectral import FourierGrid


@pytest.fixture
def grid8():
    return FourierGrid(1, 8)
