import numpy as np
import pytest


def random_unitary(rng, dim=2):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(rng, dim=2, rank=None):
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_kraus(rng, n_ops=2, dim=2):
    """Completeness-normalized random Kraus list: K_i = G_i S^{-1/2}, S = sum G^dagger G."""
    gs = [rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)) for _ in range(n_ops)]
    s = sum(g.conj().T @ g for g in gs)
    w, v = np.linalg.eigh(s)
    s_inv_half = (v / np.sqrt(w)) @ v.conj().T
    return [g @ s_inv_half for g in gs]


@pytest.fixture
def rng():
    return np.random.default_rng(20061015)
