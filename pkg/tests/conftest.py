import numpy as np
import pytest

from lowthrust.dynamics import SpacecraftParams, SystemConstants
from lowthrust.scenarios import load_scenario

EARTH_MOON_MU = 1.21506038e-2
TU = 3.75162997e5
LU = 3.84400000e5
VU = 1.02462131


@pytest.fixture(scope="session")
def constants():
    return SystemConstants(mu=EARTH_MOON_MU, tu=TU, lu=LU, vu=VU,
                           mu_mass=1500.0)


@pytest.fixture(scope="session")
def spacecraft(constants):
    # scenario-1 spacecraft: 1500 kg, 10 N, 3000 s
    return SpacecraftParams(m_i=1500.0, t_max=10.0, isp=3000.0,
                            constants=constants)


@pytest.fixture(scope="session")
def scenario1():
    return load_scenario("scenario1_gto_l1")


@pytest.fixture(scope="session")
def scenario2():
    return load_scenario("scenario2_l2_l1")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def random_state(rng, near_primary_guard=0.05):
    """Random extended state with positions away from both primaries."""
    while True:
        r = rng.uniform(-1.5, 1.5, size=3)
        r1 = np.linalg.norm(r - np.array([-EARTH_MOON_MU, 0, 0]))
        r2 = np.linalg.norm(r - np.array([1 - EARTH_MOON_MU, 0, 0]))
        if r1 > near_primary_guard and r2 > near_primary_guard:
            break
    y = np.empty(14)
    y[0:3] = r
    y[3:6] = rng.uniform(-2.0, 2.0, size=3)
    y[6] = rng.uniform(0.6, 1.0)
    y[7:10] = rng.uniform(-5.0, 5.0, size=3)
    y[10:13] = rng.uniform(-1.0, 1.0, size=3)
    y[13] = rng.uniform(0.0, 1.0)
    return y
