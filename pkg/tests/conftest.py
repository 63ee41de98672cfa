import warnings

import pytest

from dynstc.model import example_plant
from dynstc.paramgen import synthesize_family
from dynstc.sim import DelayModel, simulate
from dynstc.storage import quadratic_bundle

LAM = 0.2
C_X = 4.55
TAU_MAD = 4e-4
M = 30


@pytest.fixture(scope="session")
def family():
    return synthesize_family(lam=LAM, tau_mad=TAU_MAD, c_x=C_X, m=M)


@pytest.fixture(scope="session")
def cfg(family):
    return family.config


@pytest.fixture(scope="session")
def bundle():
    return quadratic_bundle(0.505, LAM)


@pytest.fixture(scope="session")
def plant():
    return example_plant()


@pytest.fixture(scope="session")
def example_run(plant, cfg, bundle):
    """The reference scenario: x0 = 2, delays at tau_mad, 10 s, region mode."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return simulate(plant, cfg, bundle, [2.0], 10.0, DelayModel.constant(TAU_MAD),
                        strict=False)
