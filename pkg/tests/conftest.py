"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from slprecode import modem

# Fixed two-user, two-antenna reference channel with strongly aligned
# user rows (|colinearity| = 0.9992); the hard case for downlink power.
H_REF = np.array([
    [-0.4965 + 0.0618j, 0.5403 + 1.0261j],
    [-0.3680 + 0.0010j, 0.2111 + 0.8027j],
])

GAMMA_REF = 3.0          # per-user SINR target (4.771 dB)
SIGMA_REF = 1.0


@pytest.fixture(scope="session")
def h_ref():
    return H_REF.copy()


@pytest.fixture(scope="session")
def qpsk():
    return modem.constellation_from_name("qpsk")


@pytest.fixture(scope="session")
def qam8():
    return modem.constellation_from_name("8qam")


@pytest.fixture(scope="session")
def psk8():
    return modem.constellation_from_name("8psk")


def random_channel(rng, K=2, M=2):
    return (rng.standard_normal((K, M))
            + 1j * rng.standard_normal((K, M))) / np.sqrt(2)
