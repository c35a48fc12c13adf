"""Shared fixtures: canonical laws and a CI-safe hypothesis profile."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rwre import DirichletFloor, EnvironmentLaw, Homogeneous, TwoPoint

settings.register_profile(
    "ci",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("ci")

E1 = np.array([1.0, 0.0])


@pytest.fixture
def symmetric_law():
    """d = 2 simple random walk; every slab exit is a fair coin."""
    return EnvironmentLaw(2, 0.25, Homogeneous((0.25, 0.25, 0.25, 0.25)))


@pytest.fixture
def biased_law():
    """d = 2, drift along +e1 with back/forward ratio theta = 1/4."""
    return EnvironmentLaw(2, 0.1, Homogeneous((0.4, 0.1, 0.25, 0.25)))


@pytest.fixture
def half_theta_law():
    """Like biased_law but theta = 1/2, for a second ruin-oracle point."""
    return EnvironmentLaw(2, 0.2, Homogeneous((0.4, 0.2, 0.2, 0.2)))


@pytest.fixture
def dirichlet_law():
    return EnvironmentLaw(2, 0.05, DirichletFloor((2.0, 1.0, 1.5, 1.5)), master_seed=7)


@pytest.fixture
def two_point_law():
    return EnvironmentLaw(
        2,
        0.1,
        TwoPoint(v_plus=(0.4, 0.1, 0.25, 0.25), v_minus=(0.1, 0.4, 0.25, 0.25), w=0.5),
        master_seed=3,
    )
