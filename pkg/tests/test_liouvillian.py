import numpy as np
import pytest

from btclab.dicke import build_basis, spin_operator
from btclab.liouvillian import (
    ModelParams,
    build_liouvillian,
    check_density_matrix,
    dominant_decay_rate,
    evolve,
    expectation,
    ground_state_down,
    maximally_mixed,
    spectrum,
    steady_state,
    unvectorize,
    vectorize,
    _slow_eigs_arnoldi,
)
from conftest import dense_generator_matrix, random_density_matrix, random_hermitian


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(0.5, 0.0, 4)
    with pytest.raises(ValueError):
        ModelParams(0.5, 1.0, 0)
    with pytest.raises(ValueError):
        ModelParams(float("nan"), 1.0, 4)


@pytest.mark.parametrize("n,omega", [(1, 1.0), (2, 0.7), (4, 1.5)])
def test_matches_map_oracle(n, omega):
    """Kron-assembled generator equals the matrix built from the map itself."""
    sup = build_liouvillian(ModelParams(omega, 1.0, n))
    oracle = dense_generator_matrix(n, omega, 1.0)
    np.testing.assert_allclose(sup.matrix.toarray(), oracle, atol=1e-12)


@pytest.mark.parametrize("n,omega", [(3, 0.5), (8, 1.5), (15, 1.0)])
def test_trace_preservation(n, omega):
    sup = build_liouvillian(ModelParams(omega, 1.0, n))
    left = vectorize(np.eye(n + 1, dtype=complex)).conj() @ sup.matrix
    assert np.max(np.abs(left)) <= 1e-10 * np.abs(sup.matrix).max()


@pytest.mark.parametrize("n", [2, 6, 11])
def test_hermiticity_preservation(n, rng):
    sup = build_liouvillian(ModelParams(0.9, 1.0, n))
    for _ in range(20):
        h = random_hermitian(n + 1, rng)
        out = unvectorize(sup.matrix @ vectorize(h), n + 1)
        assert np.max(np.abs(out - out.conj().T)) <= 1e-10 * max(
            1.0, np.max(np.abs(out))
        )


def test_dark_state_at_zero_drive():
    n = 6
    sup = build_liouvillian(ModelParams(0.0, 1.0, n))
    rho = ground_state_down(sup.basis)
    assert np.max(np.abs(sup.matrix @ vectorize(rho))) <= 1e-12
    ss = steady_state(sup)
    np.testing.assert_allclose(ss, rho, atol=1e-9)


@pytest.mark.parametrize("n,omega", [(4, 0.6), (10, 1.2)])
def test_steady_state_matches_dense_null_space(n, omega):
    sup = build_liouvillian(ModelParams(omega, 1.0, n))
    rho = steady_state(sup)
    check_density_matrix(rho)
    # dense null-space cross-check
    w, v = np.linalg.eig(sup.matrix.toarray())
    idx = np.argmin(np.abs(w))
    null = unvectorize(v[:, idx], n + 1)
    null = null / np.trace(null)
    null = 0.5 * (null + null.conj().T)
    np.testing.assert_allclose(rho, null, atol=1e-8)


def test_static_phase_magnetization_nonzero():
    values = []
    for n in (10, 20, 40):
        sup = build_liouvillian(ModelParams(0.5, 1.0, n))
        rho = steady_state(sup)
        sz = spin_operator(sup.basis, "z")
        values.append(abs(expectation(rho, sz)) / n)
    assert all(v > 0.3 for v in values)
    # converges: successive differences shrink
    assert abs(values[2] - values[1]) < abs(values[1] - values[0])


def test_crystal_phase_magnetization_vanishes():
    values = []
    for n in (10, 20, 40):
        sup = build_liouvillian(ModelParams(1.5, 1.0, n))
        rho = steady_state(sup)
        sz = spin_operator(sup.basis, "z")
        values.append(abs(expectation(rho, sz)) / n)
    assert values[0] > values[1] > values[2]


def test_spectrum_static_phase_real():
    sup = build_liouvillian(ModelParams(0.5, 1.0, 20))
    spec = spectrum(sup, 9)
    w = spec.eigenvalues
    assert w.shape == (9,)
    assert np.all(w.real <= 1e-9)
    assert np.max(np.abs(w.imag)) <= 1e-8
    assert np.sum(np.abs(w) <= 1e-9) == 1  # unique steady state


def test_spectrum_conjugate_pairs():
    sup = build_liouvillian(ModelParams(1.5, 1.0, 20))
    spec = spectrum(sup, 15)
    w = spec.eigenvalues
    for e in w:
        if abs(e.imag) > 1e-8:
            assert np.min(np.abs(w - e.conjugate())) <= 1e-8


def test_spectrum_k_validation():
    sup = build_liouvillian(ModelParams(0.5, 1.0, 3))
    with pytest.raises(ValueError):
        spectrum(sup, 0)
    with pytest.raises(ValueError):
        spectrum(sup, 17)


def test_arnoldi_matches_dense():
    sup = build_liouvillian(ModelParams(1.5, 1.0, 30))
    dense = spectrum(sup, 8).eigenvalues
    arnoldi = _slow_eigs_arnoldi(sup.matrix, k=8)
    arnoldi = arnoldi[np.argsort(-arnoldi.real)][:8]
    for e in dense:
        assert np.min(np.abs(arnoldi - e)) <= 1e-7


def test_dominant_decay_two_level_oracle():
    n, omega = 1, 1.0
    sup = build_liouvillian(ModelParams(omega, 1.0, n))
    rate = dominant_decay_rate(sup)
    w = np.linalg.eigvals(dense_generator_matrix(n, omega, 1.0))
    nonzero = w[np.abs(w) > 1e-9]
    expected = abs(max(nonzero.real))
    assert rate.e2_abs == pytest.approx(expected, rel=1e-9)
    assert rate.tau == pytest.approx(1.0 / expected, rel=1e-9)


def test_dominant_decay_dark_limit_positive():
    rate = dominant_decay_rate(build_liouvillian(ModelParams(0.0, 1.0, 6)))
    assert rate.e2_abs > 0


def test_evolve_time_zero_identity():
    sup = build_liouvillian(ModelParams(0.8, 1.0, 5))
    rho0 = maximally_mixed(sup.basis)
    traj = evolve(sup, rho0, [0.0])
    np.testing.assert_array_equal(traj.states[0], rho0)


def test_evolve_invariants_and_monotone_times():
    sup = build_liouvillian(ModelParams(1.2, 1.0, 8))
    rho0 = ground_state_down(sup.basis)
    traj = evolve(sup, rho0, np.linspace(0.0, 5.0, 11))
    for rho in traj.states:
        check_density_matrix(rho, herm_tol=1e-8, trace_tol=1e-8)
    with pytest.raises(ValueError):
        evolve(sup, rho0, [1.0, 0.5])
    with pytest.raises(ValueError):
        evolve(sup, rho0, [-1.0, 0.5])


def test_long_time_limit_is_steady_state(rng):
    """Relaxation from three very different initial states hits the same state."""
    n = 8
    sup = build_liouvillian(ModelParams(0.8, 1.0, n))
    ss = steady_state(sup)
    t_final = 10.0 / dominant_decay_rate(sup).e2_abs
    up = np.zeros((n + 1, n + 1), dtype=complex)
    up[0, 0] = 1.0
    for rho0 in (ground_state_down(sup.basis), up, maximally_mixed(sup.basis)):
        traj = evolve(sup, rho0, [0.0, t_final])
        assert np.linalg.norm(traj.states[-1] - ss) <= 1e-6


def test_expectation_examples(rng):
    n = 4
    basis = build_basis(n)
    sz = spin_operator(basis, "z")
    assert expectation(ground_state_down(basis), sz) == pytest.approx(-n / 2)
    assert expectation(maximally_mixed(basis), sz) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ValueError):
        # non-Hermitian input leaves an imaginary residue
        bad = random_density_matrix(n + 1, rng) + 0.1j * np.eye(n + 1)
        expectation(bad, spin_operator(basis, "x") @ sz)
