"""Shared fixtures for the ffts-eso test suite."""

import numpy as np
import pytest

from ffts_eso.differentiator import DifferentiatorGains
from ffts_eso.geometry import exp_so3
from ffts_eso.models import (
    DisturbanceProfile,
    RigidBodyParams,
    RotationalGainsConfig,
    SimConfig,
    TranslationalGainsConfig,
)


@pytest.fixture
def rng():
    """Seeded generator so every randomized test is reproducible."""
    return np.random.default_rng(20240601)


@pytest.fixture
def random_rotation(rng):
    """Callable drawing a rotation with angle uniform in [0, pi)."""

    def draw():
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        return exp_so3(rng.uniform(0.0, np.pi) * axis)

    return draw


@pytest.fixture
def channel():
    """Differentiator gains k1 = 3, k2 = 2, k3 = 6, p = 1.2."""
    return DifferentiatorGains(3.0, 2.0, 6.0, 1.2)


@pytest.fixture
def gains_t():
    """Default translational observer gains."""
    return TranslationalGainsConfig().build()


@pytest.fixture
def gains_r():
    """Default rotational observer gains."""
    return RotationalGainsConfig().build()


@pytest.fixture
def body():
    """Default vehicle mass properties."""
    return RigidBodyParams()


@pytest.fixture
def short_config(tmp_path):
    """A 50 ms hover run writing into a temporary directory."""
    return SimConfig(duration=0.05, out_dir=tmp_path)


@pytest.fixture
def constant_disturbance():
    """Force and torque disturbances that never switch."""
    return DisturbanceProfile.constant(force=(5.0, 10.0, 0.0), torque=(-0.1, 0.1, 0.1))
