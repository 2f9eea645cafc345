import numpy as np
import pytest

from wzlab.cadlag import quadratic_variation_split
from wzlab.drivers import DriverSpec, RandomSeed, simulate


@pytest.fixture(scope="session")
def unit_jump():
    """Unit jump at t = 1 on [0, 2], step interpolation."""
    return simulate(DriverSpec.single_jump(1.0, 1.0, T=2.0, dt=0.01), RandomSeed(0))


@pytest.fixture(scope="session")
def unit_jump_qv(unit_jump):
    return quadratic_variation_split(unit_jump)


@pytest.fixture(scope="session")
def jump_diffusion_spec():
    return DriverSpec.jump_diffusion(1.0, 0.0, 2.0, __import__("wzlab").JumpLaw.normal(0.0, 1.0), 1.0, 1e-3)


@pytest.fixture(scope="session")
def identity_path():
    """The deterministic path t -> t on [0, 2]."""
    return simulate(DriverSpec.brownian(0.0, 1.0, T=2.0, dt=0.01), RandomSeed(0))
