"""Dense statevector/density-matrix engine against the closed-form reference."""

import math

import numpy as np
import pytest

from grovertn import analytic, dense
from grovertn.channels import GlobalDepolarizing, make_amplitude_damping, make_phase_flip
from grovertn.errors import ResourceError, StateError, ValidationError

from conftest import random_state_vector


def test_init_uniform():
    state = dense.init_uniform(2)
    np.testing.assert_allclose(state.amplitudes, np.full(4, 0.5), atol=0)
    assert dense.success_probability(state, "10") == pytest.approx(0.25, abs=1e-15)
    assert np.linalg.norm(state.amplitudes) == pytest.approx(1.0, abs=1e-15)


def test_resource_guards():
    with pytest.raises(ResourceError):
        dense.init_uniform(15)
    with pytest.raises(ResourceError):
        dense.init_uniform(1)
    with pytest.raises(ResourceError):
        dense.init_uniform_dm(13)


def test_oracle_action():
    state = dense.init_uniform(3)
    dense.apply_oracle(state, "101")
    assert state.amplitudes[0b101] == pytest.approx(-(2.0**-1.5), abs=1e-15)
    assert state.amplitudes[0b100] == pytest.approx(2.0**-1.5, abs=1e-15)
    dense.apply_oracle(state, "101")
    np.testing.assert_allclose(state.amplitudes, np.full(8, 2.0**-1.5), atol=1e-14)


def test_oracle_validates_bitstring():
    state = dense.init_uniform(3)
    with pytest.raises(ValidationError):
        dense.apply_oracle(state, "10")
    with pytest.raises(ValidationError):
        dense.apply_oracle(state, "10x")


def test_oracle_density_matches_statevector(rng):
    psi = random_state_vector(rng, 3)
    state = dense.DenseState(psi.copy(), 3)
    dm = dense.DenseDensityMatrix(np.outer(psi, psi.conj()), 3)
    dense.apply_oracle(state, "011")
    dense.apply_oracle(dm, "011")
    np.testing.assert_allclose(
        dm.entries, np.outer(state.amplitudes, state.amplitudes.conj()), atol=1e-14
    )


def test_diffusion_fixes_uniform_and_is_involutive(rng):
    state = dense.init_uniform(4)
    dense.apply_diffusion(state)
    np.testing.assert_allclose(state.amplitudes, np.full(16, 0.25), atol=1e-14)

    psi = random_state_vector(rng, 4)
    psi -= np.mean(psi)  # orthogonal to the uniform state
    psi /= np.linalg.norm(psi)
    state = dense.DenseState(psi.copy(), 4)
    dense.apply_diffusion(state)
    np.testing.assert_allclose(state.amplitudes, -psi, atol=1e-14)
    dense.apply_diffusion(state)
    np.testing.assert_allclose(state.amplitudes, psi, atol=1e-14)


def test_noiseless_run_matches_closed_form():
    for n in (4, 6, 8, 10):
        trace = dense.run_grover(n, "1" * n)
        for k in trace.k:
            assert trace.success[k] == pytest.approx(
                analytic.ideal_success_probability(n, int(k)), abs=1e-10
            )
            assert trace.entropy[k] == pytest.approx(
                analytic.two_level_entropy(n, analytic.grover_angle(n, int(k))), abs=1e-10
            )


def test_phase_flip_zero_equals_noiseless():
    clean = dense.run_grover(4, "1111")
    noisy = dense.run_grover(4, "1111", make_phase_flip(0.0))
    np.testing.assert_allclose(noisy.success, clean.success, atol=1e-12)


def test_depolarizing_closed_form():
    for n, p in ((4, 0.01), (4, 0.05), (6, 0.01), (6, 0.05)):
        iters = analytic.optimal_iterations(n)
        trace = dense.run_grover(n, "1" * n, GlobalDepolarizing(p), iters)
        ideal = analytic.ideal_success_probability(n, iters)
        expected = (1 - p) ** iters * (ideal - 2.0**-n) + 2.0**-n
        assert trace.success[-1] == pytest.approx(expected, abs=1e-12)


def test_depolarizing_example_value():
    trace = dense.run_grover(4, "1111", GlobalDepolarizing(0.01), 3)
    assert trace.success[-1] == pytest.approx(0.9346231475067139, abs=1e-12)


def test_amplitude_damping_target_permutation_symmetry():
    a = dense.run_grover(4, "0011", make_amplitude_damping(0.05))
    b = dense.run_grover(4, "0101", make_amplitude_damping(0.05))
    np.testing.assert_allclose(a.success, b.success, atol=1e-12)


def test_reduced_density_matrix_product_and_bell():
    zero = np.zeros(4, dtype=complex)
    zero[0] = 1.0
    product = dense.DenseState(zero, 2)
    assert dense.entropy_bits(dense.reduced_density_matrix(product, 1)) == pytest.approx(0.0, abs=1e-12)

    bell = np.zeros(4, dtype=complex)
    bell[0] = bell[3] = 1 / math.sqrt(2)
    state = dense.DenseState(bell, 2)
    assert dense.entropy_bits(dense.reduced_density_matrix(state, 1)) == pytest.approx(1.0, abs=1e-12)


def test_reduced_density_matrix_cut_validation():
    state = dense.init_uniform(3)
    with pytest.raises(ValidationError):
        dense.reduced_density_matrix(state, 0)
    with pytest.raises(ValidationError):
        dense.reduced_density_matrix(state, 3)


def test_grover_schmidt_rank_two():
    n = 8
    state = dense.init_uniform(n)
    for _ in range(analytic.optimal_iterations(n)):
        dense.apply_oracle(state, "1" * n)
        dense.apply_diffusion(state)
        sigmas = dense.schmidt_values(state, n // 2)
        assert sigmas[2] <= 1e-12
        assert dense.state_entropy(state, n // 2) <= 1.0 + 1e-12


def test_operator_entanglement_basics(rng):
    zero = np.zeros(4, dtype=complex)
    zero[0] = 1.0
    pure_product = dense.DenseDensityMatrix(np.outer(zero, zero), 2)
    assert dense.operator_entanglement(pure_product, 1) == pytest.approx(0.0, abs=1e-12)

    mixed = dense.DenseDensityMatrix(np.eye(16) / 16.0, 4)
    assert dense.operator_entanglement(mixed, 2) == pytest.approx(0.0, abs=1e-12)


def test_operator_entanglement_pure_state_doubling(rng):
    for n in (4, 6):
        psi = random_state_vector(rng, n)
        dm = dense.DenseDensityMatrix(np.outer(psi, psi.conj()), n)
        state = dense.DenseState(psi, n)
        for cut in range(1, n):
            assert dense.operator_entanglement(dm, cut) == pytest.approx(
                2.0 * dense.state_entropy(state, cut), abs=1e-10
            )


def test_success_probability_cases():
    n = 8
    target = np.zeros(2**n, dtype=complex)
    target[-1] = 1.0
    assert dense.success_probability(dense.DenseState(target, n), "1" * n) == pytest.approx(1.0, abs=0)
    assert dense.success_probability(dense.init_uniform(10), "0" * 10) == pytest.approx(2.0**-10, abs=1e-15)
    mixed = dense.DenseDensityMatrix(np.eye(2**n) / 2.0**n, n)
    assert dense.success_probability(mixed, "1" * n) == pytest.approx(2.0**-n, abs=1e-15)


def test_density_validation():
    with pytest.raises(StateError):
        dense.DenseDensityMatrix(np.eye(4), 2)  # trace 4
    bad = np.eye(4, dtype=complex) / 4.0
    bad[0, 1] = 0.3
    with pytest.raises(StateError):
        dense.DenseDensityMatrix(bad, 2)  # not Hermitian


def test_noisy_density_run_is_physical():
    trace = dense.run_grover(4, "1111", make_amplitude_damping(0.1))
    assert np.all(trace.success >= 0.0)
    assert np.all(trace.success <= 1.0)
    state = dense.final_density_matrix(4, "1111", make_amplitude_damping(0.1), 3)
    assert state.min_eigenvalue() >= -1e-10
    assert np.trace(state.entries).real == pytest.approx(1.0, abs=1e-10)
