"""Shared construction helpers for the test suite."""

import numpy as np

from qubitbath.fock_space import DensityMatrix


def random_density(rng: np.random.Generator, dim: int) -> DensityMatrix:
    """A full-rank random state: normalized A·A† with complex Gaussian A."""
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = a @ a.conj().T
    rho /= rho.trace().real
    return DensityMatrix(dim, rho)


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (a + a.conj().T) / 2.0


def confined_random_density(rng: np.random.Generator, dim: int, hot: int) -> DensityMatrix:
    """Random state supported on the lowest ``hot`` levels of a dim-level space."""
    a = np.zeros((dim, dim), dtype=complex)
    block = rng.standard_normal((hot, hot)) + 1j * rng.standard_normal((hot, hot))
    a[:hot, :hot] = block
    rho = a @ a.conj().T
    rho /= rho.trace().real
    return DensityMatrix(dim, rho)
