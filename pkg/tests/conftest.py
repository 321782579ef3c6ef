import math

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_density_matrix(rng, dim: int = 2) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_unitary(rng, dim: int = 2) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state_vector(rng, n: int) -> np.ndarray:
    psi = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return psi / np.linalg.norm(psi)


def two_level_state_vector(n: int, theta: float, omega_index: int = 0) -> np.ndarray:
    """sin(theta)|omega> + cos(theta)|rest>, the noiseless circuit manifold."""
    big_n = 2**n
    psi = np.full(big_n, math.cos(theta) / math.sqrt(big_n - 1), dtype=np.complex128)
    psi[omega_index] = math.sin(theta)
    return psi
