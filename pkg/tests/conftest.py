import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from chaplygin.ball import InertiaTensor, PhasePoint
from chaplygin.son import algebra_dim, random_rotation

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_point(n, rng, scale=1.0):
    return PhasePoint(random_rotation(n, rng), scale * rng.standard_normal(algebra_dim(n)))


def anisotropic(n, rng):
    return InertiaTensor.random(n, rng, spread=1.0)
