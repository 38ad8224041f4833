import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import hardexc as hx

settings.register_profile(
    "ci", derandomize=True, deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")

# hand-evaluated threshold oracles for the production parameter set
# (gamma1/2pi = gamma2/2pi = 19 MHz, gamma_b/2pi = 121 MHz,
#  d_omega1/2pi = d_omega_b/2pi = -6 GHz, g/2pi = 1.6 kHz)
PROD_OMEGA_EX = 1283068108282751.2
PROD_OMEGA_TH = 4.84310858604663e16
PROD_RATIO = 0.026492656224544903


@pytest.fixture(scope="session")
def prod_sys():
    return hx.SystemParams.from_hz(19e6, 19e6, 121e6, 1.6e3)


@pytest.fixture(scope="session")
def prod_det():
    return hx.Detunings.from_values(2 * np.pi * -6e9)


@pytest.fixture(scope="session")
def cheap_sys():
    """Small-stiffness hard-excitation system for fast end-to-end tests."""
    return hx.SystemParams(gamma1=1.0, gamma2=1.0, gamma_b=6.0, g=1e-3)


@pytest.fixture(scope="session")
def cheap_det():
    return hx.Detunings.from_values(-30.0)


@pytest.fixture(scope="session")
def cheap_thresholds(cheap_sys, cheap_det):
    from hardexc.stability import thresholds
    return thresholds(cheap_sys, cheap_det)


@pytest.fixture(scope="session")
def tight_cfg():
    return hx.IntegratorConfig(rel_tol=1e-11, abs_tol=1e-12)
