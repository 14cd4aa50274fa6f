import numpy as np
import pytest

from mtcpert.modules.opalg.services import PAULI_X, PAULI_Z, spectral_decompose


@pytest.fixture(scope="function")
def rng():
    """Fresh seeded generator per test so test order never changes the draws."""
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def sigma_z():
    return spectral_decompose(PAULI_Z)


@pytest.fixture(scope="session")
def sigma_x():
    return spectral_decompose(PAULI_X)


def random_observable(d, rng, levels=(-1.0, 0.5, 2.0)):
    """Random hermitian observable with at most ``len(levels)`` distinct eigenvalues."""
    values = rng.choice(levels, size=d)
    G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    Q, _ = np.linalg.qr(G)
    return spectral_decompose((Q * values) @ Q.conj().T)
