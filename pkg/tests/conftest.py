import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from localcap import ChannelParams, Region

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def channel():
    return ChannelParams(beta=10.0, alpha=4.0)


@pytest.fixture
def desk_region():
    return Region.square(2000.0)


@pytest.fixture
def two_nodes():
    return np.array([[0.0, 0.0], [25.0, 0.0]])
