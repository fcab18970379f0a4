import math

import pytest
from hypothesis import HealthCheck, settings

from bethe_ff import lieb

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ref_params():
    """zeta = pi/3, J = 1, h = h_c / 2: the reference point used throughout."""
    z = math.pi / 3
    return lieb.ModelParams.from_field(z, 1.0, 0.5 * lieb.critical_field(z, 1.0))


@pytest.fixture(scope="session")
def ref_thermo(ref_params):
    return lieb.Thermo.build(ref_params)
