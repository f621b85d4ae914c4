import numpy as np
import pytest

from btclab.dicke import build_basis, spin_operator


def apply_generator(n_spins, omega, kappa, rho):
    """Reference action of the master-equation right-hand side on a matrix.

    Built from plain dense matrix products, independently of the Kronecker
    assembly used by the production superoperator.
    """
    basis = build_basis(n_spins)
    s = basis.total_spin
    sx = spin_operator(basis, "x")
    sp = spin_operator(basis, "plus")
    sm = spin_operator(basis, "minus")
    spsm = sp @ sm
    comm = sx @ rho - rho @ sx
    diss = sm @ rho @ sp - 0.5 * (spsm @ rho + rho @ spsm)
    return -1j * omega * comm + (kappa / s) * diss


def dense_generator_matrix(n_spins, omega, kappa):
    """Superoperator matrix assembled column by column from the map itself."""
    dim = n_spins + 1
    n2 = dim * dim
    mat = np.zeros((n2, n2), dtype=complex)
    for j in range(n2):
        e = np.zeros(n2, dtype=complex)
        e[j] = 1.0
        basis_mat = e.reshape((dim, dim), order="F")
        mat[:, j] = apply_generator(n_spins, omega, kappa, basis_mat).reshape(
            -1, order="F"
        )
    return mat


def random_density_matrix(dim, rng):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_hermitian(dim, rng):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (a + a.conj().T)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
