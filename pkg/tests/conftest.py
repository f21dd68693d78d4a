import numpy as np
import pytest

from finvisc import kernels
from finvisc.material import vhb4910

KAPPA_NEAR = 146200.0  # 1e4 (mu1 + mu2)
KAPPA_SOFT = 14.62  # (mu1 + mu2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def params():
    """VHB 4910 constants with the near-incompressible bulk modulus."""
    return vhb4910(KAPPA_NEAR)


@pytest.fixture
def params_inc():
    return vhb4910()


@pytest.fixture
def params_soft():
    return vhb4910(KAPPA_SOFT)


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    """Run the test once per available kernel backend."""
    with kernels.backend(request.param):
        yield request.param
