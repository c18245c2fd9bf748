import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qmirror.hybrid import HybridPure, normalize

settings.register_profile(
    "repo", derandomize=True, deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


def random_pure(rng, num_qubits=1, num_modes=2, branches=4, max_amp=3.0):
    """Random normalized branch state with bounded mode amplitudes."""
    keys = rng.integers(0, 2, size=(branches, num_qubits))
    radius = max_amp * np.sqrt(rng.uniform(size=(branches, num_modes)))
    amps = radius * np.exp(2j * np.pi * rng.uniform(size=(branches, num_modes)))
    coeffs = rng.standard_normal(branches) + 1j * rng.standard_normal(branches)
    return normalize(HybridPure(num_qubits, num_modes, keys, amps, coeffs))


def haar_qubit(rng):
    z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    return z / np.linalg.norm(z)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
