import pytest

from ionflux.model import BathState, ChannelGeometry, IonPair, moments


@pytest.fixture
def ions():
    return IonPair()


@pytest.fixture
def ref_bath():
    return BathState(V=1.0, L=0.5, R=1.0)


@pytest.fixture
def ref_moments():
    return moments(ChannelGeometry())
