import numpy as np
import pytest

from resetsim import (ControlProtocol, SpectralDensity, build_influence,
                      build_process_tensor)
from resetsim.units import TWO_PI

WQ0 = TWO_PI*5.0


@pytest.fixture(scope="session")
def ohmic_sd():
    return SpectralDensity(kind="ohmic-exponential", alpha=0.03,
                           omega_c=TWO_PI*5.0)


@pytest.fixture(scope="session")
def weak_sd():
    return SpectralDensity(kind="ohmic-exponential", alpha=0.003,
                           omega_c=TWO_PI*5.0)


@pytest.fixture(scope="session")
def gaussian_sd():
    return SpectralDensity(kind="gaussian-filtered", alpha=0.013,
                           omega_c=TWO_PI*5.0, sigma=TWO_PI*0.5)


@pytest.fixture(scope="session")
def small_pt(ohmic_sd):
    """Short full-accuracy process tensor shared by cheap tests
    (1.2 ns at dt=0.01, 1 ns memory)."""
    inf = build_influence(ohmic_sd, 0.01, 120, memory_max_steps=100)
    return build_process_tensor(inf, svd_cutoff=1e-7, max_bond=128,
                                forward="gram")


@pytest.fixture(scope="session")
def small_protocol(small_pt):
    return ControlProtocol.constant(WQ0, small_pt.dt, small_pt.n_steps)
